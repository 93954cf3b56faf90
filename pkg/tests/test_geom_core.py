"""Chart machinery: metrics, curvature, ambient assembly, model identities."""

import numpy as np
import pytest

from srflab import geom_core as gc
from srflab.errors import (GridTooCoarse, NonPositiveMetric,
                           NonPositiveParameter, SingularMetric, VectorNotInD)
from srflab.models import RoundSphereModel


# -- chart builders ---------------------------------------------------------

def flat_chart(M=16, eps=0.0, Q=None, n=1, seed=3):
    if Q is None:
        Q = 0.5 * np.eye(n)
    L = 2.0 * np.pi
    h = L / M
    origin = -np.pi * np.ones(2 * n)
    boundary = {"kind": "periodic", "reference": Q}
    axes = [origin[a] + h * np.arange(M) for a in range(2 * n)]
    grids = np.meshgrid(*axes, indexing="ij")
    ref = np.zeros(grids[0].shape)
    z = [grids[2 * i] + 1j * grids[2 * i + 1] for i in range(n)]
    for i in range(n):
        for j in range(n):
            ref += np.real(Q[i, j] * z[i] * np.conj(z[j]))
    G = ref.copy()
    if eps:
        rng = np.random.default_rng(seed)
        for i in range(n):
            a = rng.uniform(0, 2 * np.pi, 4)
            G += eps * (np.cos(np.real(z[i]) + a[0])
                        + np.cos(np.imag(z[i]) + a[1])
                        + np.sin(2 * np.real(z[i]) + a[2])
                        * np.cos(np.imag(z[i]) + a[3]))
    return gc.build_chart(G, n, boundary, spacing=h, origin=origin)


def fs_z_chart(M=64, extent=0.8, a=1.0):
    h = 2.0 * extent / M
    origin = np.array([-extent, -extent])
    x = origin[0] + h * np.arange(M)
    X, Y = np.meshgrid(x, x, indexing="ij")
    G = 0.5 * a * np.log(1.0 + X ** 2 + Y ** 2)
    return gc.build_chart(G, 1, {"kind": "pole"}, spacing=h, origin=origin)


def cylinder_chart(Ms=64, Mt=8, smax=3.0):
    hs = 2.0 * smax / Ms
    ht = 2.0 * np.pi / Mt
    origin = np.array([-smax, 0.0])
    s = origin[0] + hs * np.arange(Ms)
    S, _ = np.meshgrid(s, ht * np.arange(Mt), indexing="ij")
    G = 0.5 * np.log1p(np.exp(2.0 * S))
    return gc.build_chart(G, 1, {"kind": "pole", "periodic_axes": (1,)},
                          spacing=(hs, ht), origin=origin)


# -- build / metric examples ------------------------------------------------

def test_flat_chart_metric_and_curvature():
    chart = flat_chart()
    met = gc.metric_from_chart(chart)
    assert np.max(np.abs(met.g - 1.0)) < 1e-12
    assert np.max(np.abs(met.christoffel)) < 1e-12
    curv = gc.curvature(met)
    assert np.max(np.abs(curv.riem)) < 1e-12
    assert np.max(np.abs(curv.scalar)) < 1e-12


def test_negative_potential_rejected():
    chart_Q = -0.5 * np.eye(1)
    with pytest.raises(NonPositiveMetric) as err:
        flat_chart(Q=chart_Q)
    assert err.value.eigenvalue < 0


def test_too_coarse_grid_rejected():
    with pytest.raises(GridTooCoarse):
        flat_chart(M=6)


def test_singular_metric_detected():
    Q = np.diag([0.5, 0.5e-13])
    chart = flat_chart(Q=Q, n=2, M=8)
    with pytest.raises(SingularMetric):
        gc.metric_from_chart(chart)


def test_fs_chart_origin_values():
    chart = fs_z_chart()
    met = gc.metric_from_chart(chart)
    i0 = chart.G.shape[0] // 2  # grid point at z = 0
    assert np.real(met.g[i0, i0, 0, 0]) == pytest.approx(1.0, abs=5e-3)
    assert abs(met.christoffel[i0, i0, 0, 0, 0]) < 5e-3
    curv = gc.curvature(met)
    win = chart.interior_window(6)
    assert np.max(np.abs(curv.scalar[win] - 8.0)) < 0.05


def test_kahler_symmetries_to_roundoff():
    chart = flat_chart(M=12, eps=0.02, n=2)
    curv = gc.curvature(gc.metric_from_chart(chart))
    r = curv.riem
    scale = np.max(np.abs(r))
    assert np.max(np.abs(r - np.einsum("...ijkl->...kjil", r))) < 1e-12 * scale
    assert np.max(np.abs(r - np.einsum("...ijkl->...ilkj", r))) < 1e-12 * scale
    herm = np.conj(np.einsum("...ijkl->...jilk", r))
    assert np.max(np.abs(r - herm)) < 1e-12 * scale
    # contraction consistency
    ric = np.einsum("...ij,...ijkl->...kl", curv.metric.g_inv, r)
    assert np.max(np.abs(ric - curv.ricci)) < 1e-12 * np.max(np.abs(ric))
    tr = 2.0 * np.real(np.einsum("...kl,...kl->...",
                                 curv.metric.g_inv, curv.ricci))
    assert np.max(np.abs(tr - curv.scalar)) < 1e-12 * max(1, np.max(np.abs(tr)))


def test_ricci_form_independent_check():
    chart = cylinder_chart(Ms=128)
    met = gc.metric_from_chart(chart)
    curv = gc.curvature(met)
    rho = gc.ricci_form_independent(met)
    win = chart.interior_window(6)
    diff = np.abs(curv.ricci_form[win] - rho[win])
    assert np.max(diff) < 5e-3


def _window_mask(chart, slim):
    s = chart.axis_points(0)
    return np.abs(s) <= slim


def test_fd_convergence_second_order():
    # refine the non-periodic axis; errors against closed forms on a fixed
    # physical window drop by 4 per halving
    errs_g, errs_gam, errs_R = [], [], []
    for Ms in (64, 128, 256):
        chart = cylinder_chart(Ms=Ms)
        met = gc.metric_from_chart(chart)
        curv = gc.curvature(met)
        s = chart.axis_points(0)
        mask = np.abs(s) <= 2.0
        e2s = np.exp(2.0 * s[mask])
        g_exact = e2s / (1.0 + e2s) ** 2
        gam_exact = -np.tanh(s[mask])
        g_num = np.real(met.g[mask, :, 0, 0])
        gam_num = np.real(met.christoffel[mask, :, 0, 0, 0])
        R_num = curv.scalar[mask, :]
        errs_g.append(np.max(np.abs(g_num - g_exact[:, None])))
        errs_gam.append(np.max(np.abs(gam_num - gam_exact[:, None])))
        errs_R.append(np.max(np.abs(R_num - 8.0)))
    for errs in (errs_g, errs_gam, errs_R):
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.2)


def test_n2_fs_chart_constant_holomorphic_form():
    # FS potential in two complex variables: riem = 2(g g + g g) + O(h^2)
    M = 14
    extent = 0.35
    h = 2 * extent / M
    origin = -extent * np.ones(4)
    ax = [origin[k] + h * np.arange(M) for k in range(4)]
    X1, Y1, X2, Y2 = np.meshgrid(*ax, indexing="ij")
    G = 0.5 * np.log(1.0 + X1 ** 2 + Y1 ** 2 + X2 ** 2 + Y2 ** 2)
    chart = gc.build_chart(G, 2, {"kind": "pole"}, spacing=h, origin=origin)
    met = gc.metric_from_chart(chart)
    curv = gc.curvature(met)
    g = met.g
    model = 2.0 * (np.einsum("...ij,...kl->...ijkl", g, g)
                   + np.einsum("...il,...kj->...ijkl", g, g))
    win = chart.interior_window(4)
    diff = np.max(np.abs(curv.riem[win] - model[win]))
    assert diff < 0.05 * np.max(np.abs(model[win]))


# -- ambient assembly on analytic models ------------------------------------

def _random_D_vector(rng, n):
    v = np.zeros(2 * n + 1)
    v[1:] = rng.standard_normal(2 * n)
    return v


@pytest.mark.parametrize("n", [1, 2])
def test_model_sectional_curvature_is_one(n):
    model = RoundSphereModel(n)
    rng = np.random.default_rng(11)
    for z in model.sample_points(4, seed=n):
        gpt = model.gT(z)
        riem = model.riem(z)
        for _ in range(12):
            A = _random_D_vector(rng, n)
            B = _random_D_vector(rng, n)
            A[0] = rng.standard_normal()  # arbitrary Reeb components
            B[0] = rng.standard_normal()
            num = gc.ambient_curvature(riem, gpt, A, B, A, B)
            den = (gc.g_full(gpt, A, A) * gc.g_full(gpt, B, B)
                   - gc.g_full(gpt, A, B) ** 2)
            if den < 1e-8:
                continue
            assert num / den == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("n", [1, 2])
def test_model_reeb_curvature_identity(n):
    model = RoundSphereModel(n)
    rng = np.random.default_rng(5)
    for z in model.sample_points(3, seed=10 + n):
        gpt = model.gT(z)
        riem = model.riem(z)
        for _ in range(6):
            X = _random_D_vector(rng, n)
            Y = _random_D_vector(rng, n)
            assert gc.reeb_curvature_check(riem, gpt, X, Y) < 1e-10
        # pinned special cases
        X = _random_D_vector(rng, n)
        X /= np.sqrt(gc.g_full(gpt, X, X))
        assert gc.reeb_curvature_check(riem, gpt, X, X) < 1e-10
        assert gc.reeb_curvature_check(riem, gpt, X, gc.reeb_vector(n)) < 1e-10


@pytest.mark.parametrize("n,RT,R", [(1, 8.0, 6.0), (2, 24.0, 20.0)])
def test_model_curvature_relations(n, RT, R):
    model = RoundSphereModel(n)
    for z in model.sample_points(3, seed=20 + n):
        gpt = model.gT(z)
        riem = model.riem(z)
        ricci_res, scalar_res = gc.curvature_relations_check(riem, gpt)
        assert ricci_res < 1e-10
        assert scalar_res < 1e-10
        frame = gc.orthonormal_frame(gpt)
        RT_val = sum(gc.transverse_R4(riem, X, E, X, E)
                     for X in frame[1:] for E in frame[1:])
        R_val = sum(gc.ambient_ricci(riem, gpt, E, E) for E in frame)
        assert RT_val == pytest.approx(RT, abs=1e-10)
        assert R_val == pytest.approx(R, abs=1e-10)
    assert model.scalar_RT() == pytest.approx(RT)
    assert model.scalar_ambient() == pytest.approx(R)


def test_flat_transverse_phi_correction():
    # flat transverse curvature: the ambient holomorphic sectional value is
    # the pure contact correction -3
    n = 1
    gpt = np.eye(n, dtype=complex)
    riem = np.zeros((n, n, n, n), dtype=complex)
    X = np.array([0.0, 1.0, 0.0])
    Y = gc.phi_apply(X)
    val = gc.full_curvature_from_transverse(riem, gpt, X, Y, X, Y)
    assert val == pytest.approx(-3.0, abs=1e-14)
    # multilinearity: zero slots give zero
    Z = np.zeros(3)
    assert gc.full_curvature_from_transverse(riem, gpt, X, Y, Z, Z) == 0.0


def test_flat_transverse_ambient_scalar():
    # Heisenberg-type model: R^T = 0 forces ambient R = -2n
    for n in (1, 2):
        gpt = np.eye(n, dtype=complex)
        riem = np.zeros((n, n, n, n), dtype=complex)
        _, scalar_res = gc.curvature_relations_check(riem, gpt)
        assert scalar_res < 1e-12


def test_vector_not_in_D_rejected():
    gpt = np.eye(1, dtype=complex)
    riem = np.zeros((1, 1, 1, 1), dtype=complex)
    X = np.array([1e-6, 1.0, 0.0])
    with pytest.raises(VectorNotInD):
        gc.full_curvature_from_transverse(riem, gpt, X, X, X, X)


def test_phi_square_identity():
    for n in (1, 2):
        sample = gc.SasakianMetricSample(RoundSphereModel(n).gT(
            np.full(n, 0.3 + 0.2j)))
        assert sample.phi_square_residual() < 1e-12
        # adapted-frame block structure
        assert sample.full_metric[0, 0] == pytest.approx(1.0)
        assert np.max(np.abs(sample.full_metric[0, 1:])) < 1e-14


# -- D-homothety ------------------------------------------------------------

def test_d_homothetic_identity_and_inverse():
    chart = fs_z_chart(M=32)
    same = gc.d_homothetic(chart, 1.0)
    assert np.max(np.abs(same.G - chart.G)) < 1e-15
    back = gc.d_homothetic(gc.d_homothetic(chart, 3.7), 1 / 3.7)
    assert np.max(np.abs(back.G - chart.G)) < 1e-12
    with pytest.raises(NonPositiveParameter):
        gc.d_homothetic(chart, -1.0)


def test_d_homothetic_fixed_point_scaling():
    # a = 4 turns the unit-Hopf transverse structure into the flow fixed
    # point Ric^T = g^T; Ricci is invariant, the metric scales by a
    chart = fs_z_chart(M=64)
    scaled = gc.d_homothetic(chart, 4.0)
    met = gc.metric_from_chart(scaled)
    curv = gc.curvature(met)
    win = chart.interior_window(6)
    assert np.max(np.abs(curv.ricci[win] - met.g[win])) < 0.03
    met0 = gc.metric_from_chart(chart)
    assert np.max(np.abs(met.g - 4.0 * met0.g)) < 1e-10


def test_d_homothetic_volume_scaling():
    # total volume (fiber length x transverse area) multiplies by a^{n+1}
    chart = fs_z_chart(M=64, extent=0.6)
    a = 2.5
    met0 = gc.metric_from_chart(chart)
    met1 = gc.metric_from_chart(gc.d_homothetic(chart, a))
    area0 = np.sum(np.real(np.linalg.det(met0.g)))
    area1 = np.sum(np.real(np.linalg.det(met1.g)))
    vol_ratio = (a * area1) / area0  # fiber scales by a as well
    assert vol_ratio == pytest.approx(a ** 2, rel=1e-10)
