"""Basic forms: exterior calculus, adjoints, commutator identities."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srflab.errors import DegreeOverflow, DegreeUnderflow, NonPeriodicChart
from srflab.geom_core import build_chart, curvature, metric_from_chart
from srflab.hodge_basic import (BasicForm, del_B, del_star, delbar_B,
                                delbar_star, ibp_check, inner,
                                kahler_identities_residual, lefschetz_L,
                                lefschetz_lambda, periodic_test_chart,
                                random_form, weitzenbock_residual)


def flat_chart(M=24, n=1):
    return periodic_test_chart(M, eps=0.0, seed=0, n=n)


def test_del_of_real_part_coordinate():
    chart = flat_chart()
    z = chart.axis_coords()[0]
    f = BasicForm(chart, 0, 0, np.real(z).astype(complex))
    df = del_B(f)
    # d/dz of Re(z) = 1/2; centered differences are exact on linear fields
    # away from the wrap (Re(z) itself is not periodic), so probe the bulk
    bulk = df.c[4:-4, 4:-4, 0]
    assert np.max(np.abs(bulk - 0.5)) < 1e-12


def test_d_squared_zero_n2():
    chart = periodic_test_chart(10, eps=0.02, seed=3, n=2)
    f = random_form(chart, 0, 0, seed=5)
    ddf = del_B(del_B(f))
    assert ddf.max_norm() < 1e-12
    dbdbf = delbar_B(delbar_B(f))
    assert dbdbf.max_norm() < 1e-12
    # mixed second derivatives commute exactly as coefficient arrays
    a = del_B(delbar_B(f)).c
    b = delbar_B(del_B(f)).c
    assert np.max(np.abs(a - b)) < 1e-12


def test_degree_errors():
    chart = flat_chart()
    one_zero = random_form(chart, 1, 0, seed=1)
    zero_one = random_form(chart, 0, 1, seed=2)
    with pytest.raises(DegreeOverflow):
        del_B(one_zero)  # (2,0) needs n >= 2
    with pytest.raises(DegreeOverflow):
        delbar_B(zero_one)
    with pytest.raises(DegreeUnderflow):
        delbar_star(one_zero, metric_from_chart(chart))
    with pytest.raises(DegreeUnderflow):
        del_star(zero_one, metric_from_chart(chart))


def test_adjoint_pairs_flat_exact():
    chart = flat_chart(M=20)
    met = metric_from_chart(chart)
    f = random_form(chart, 0, 0, seed=11)
    phi = random_form(chart, 0, 1, seed=12)
    psi = random_form(chart, 1, 0, seed=13)
    eta = random_form(chart, 1, 1, seed=14)
    pairs = [
        (delbar_B(f), phi, f, delbar_star(phi, met)),
        (del_B(f), psi, f, del_star(psi, met)),
        (delbar_B(psi), eta, psi, delbar_star(eta, met)),
        (del_B(phi), eta, phi, del_star(eta, met)),
    ]
    for da, b, a, dstar_b in pairs:
        lhs = inner(da, b, met)
        rhs = inner(a, dstar_b, met)
        assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))


def test_adjoint_pairs_top_blocks_n2():
    chart = periodic_test_chart(10, eps=0.0, seed=0, n=2)
    met = metric_from_chart(chart)
    phi = random_form(chart, 0, 1, seed=21)
    psi = random_form(chart, 1, 0, seed=22)
    top_a = random_form(chart, 0, 2, seed=23)
    top_h = random_form(chart, 2, 0, seed=24)
    lhs = inner(delbar_B(phi), top_a, met)
    rhs = inner(phi, delbar_star(top_a, met), met)
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))
    lhs = inner(del_B(psi), top_h, met)
    rhs = inner(psi, del_star(top_h, met), met)
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))


def test_adjoint_pairing_curved_second_order():
    errs = []
    for M in (32, 64, 128):
        chart = periodic_test_chart(M, eps=0.05, seed=4)
        met = metric_from_chart(chart)
        psi = random_form(chart, 1, 0, seed=31)
        eta = random_form(chart, 1, 1, seed=32)
        lhs = inner(delbar_B(psi), eta, met)
        rhs = inner(psi, delbar_star(eta, met), met)
        scale = abs(inner(eta, eta, met)) ** 0.5
        errs.append(abs(lhs - rhs) / scale)
    assert errs[1] < 1e-3
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.5)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.5)


def test_lefschetz_pair_identity():
    chart = periodic_test_chart(16, eps=0.05, seed=6)
    met = metric_from_chart(chart)
    f = random_form(chart, 0, 0, seed=41)
    back = lefschetz_lambda(lefschetz_L(f, met), met)
    assert np.max(np.abs(back.c - chart.n * f.c)) < 1e-12


def test_kahler_identities_flat_exact():
    chart = flat_chart(M=20)
    res = kahler_identities_residual(chart, seed=0)
    assert res["commutator_del"] < 1e-12
    assert res["commutator_delbar"] < 1e-12


def test_kahler_identities_curved_second_order():
    r64 = kahler_identities_residual(periodic_test_chart(64, 0.05, 4), seed=2)
    r128 = kahler_identities_residual(periodic_test_chart(128, 0.05, 4),
                                      seed=2)
    for key in ("commutator_del", "commutator_delbar", "laplacian_pair"):
        assert r128[key] < 5e-3
        assert r64[key] / r128[key] == pytest.approx(4.0, rel=0.5)


def test_weitzenbock_second_order():
    errs = {"01": [], "11": []}
    for M in (64, 128):
        chart = periodic_test_chart(M, eps=0.05, seed=8)
        curv = curvature(metric_from_chart(chart))
        errs["01"].append(weitzenbock_residual(
            curv, random_form(chart, 0, 1, seed=51)))
        errs["11"].append(weitzenbock_residual(
            curv, random_form(chart, 1, 1, seed=52)))
    for key in errs:
        assert errs[key][1] < 5e-3
        assert errs[key][0] / errs[key][1] == pytest.approx(4.0, rel=0.5)


def test_ibp_flat_machine_zero():
    chart = flat_chart(M=128)
    met = metric_from_chart(chart)
    phi = random_form(chart, 1, 1, seed=61)
    psi = random_form(chart, 1, 1, seed=62)
    assert ibp_check(phi, psi, met) < 1e-10


def test_ibp_requires_periodic_chart():
    M = 16
    h = 0.05
    ax = h * (np.arange(M) - M / 2)
    x, y = np.meshgrid(ax, ax, indexing="ij")
    G = 0.5 * (x * x + y * y)
    chart = build_chart(G, 1, {"kind": "pole"}, spacing=h,
                        origin=np.array([ax[0], ax[0]]))
    met = metric_from_chart(chart)
    zero = BasicForm(chart, 1, 1, np.zeros(G.shape + (1, 1), dtype=complex))
    with pytest.raises(NonPeriodicChart):
        ibp_check(zero, zero, met)


@settings(max_examples=12, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_inner_product_positive(seed):
    chart = flat_chart(M=12)
    met = metric_from_chart(chart)
    rng = np.random.default_rng(seed)
    p, q = rng.integers(0, 2, size=2)
    a = random_form(chart, int(p), int(q), seed=seed % 997)
    val = inner(a, a, met)
    assert abs(val.imag) < 1e-10 * max(1.0, abs(val))
    assert val.real >= 0.0
