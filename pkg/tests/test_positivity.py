"""Bisectional curvature, reaction term, null vectors, soliton detection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import srflab.geom_core as gc
import srflab.positivity as pos
from srflab.errors import (FrameDegenerate, IncompatibleClass,
                           LowerBoundViolated, ZeroVector)
from srflab.flow_engine import FlowState, run
from srflab.profile_geom import ProfileGeometry, soliton_profile


def _gram_tensor(n, m=4, seed=7):
    """Random curvature-type tensor as a Gram sum of symmetric forms."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, n, n))
    b = rng.standard_normal((m, n, n))
    forms = (a + np.swapaxes(a, 1, 2)) + 1j * (b + np.swapaxes(b, 1, 2))
    return np.einsum("mik,mjl->ijkl", forms, np.conj(forms))


def _rand_vec(n, rng):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def brute_reaction(S, X, Y):
    """Reaction term by literal index loops, kept independent of the
    einsum implementation.  X, Y must be unit vectors in the orthonormal
    frame of S."""
    n = S.shape[0]
    t1 = t2 = t3 = t4 = 0.0
    rng_n = range(n)
    for m in rng_n:
        for k in rng_n:
            A = sum(S[a, b, m, k] * X[a] * np.conj(X[b])
                    for a in rng_n for b in rng_n)
            B = sum(S[k, m, c, d] * Y[c] * np.conj(Y[d])
                    for c in rng_n for d in rng_n)
            t1 += np.real(A * B)
            C = sum(S[a, m, c, k] * X[a] * Y[c] for a in rng_n for c in rng_n)
            t2 += abs(C) ** 2
            D = sum(S[a, b, m, k] * X[a] * np.conj(Y[b])
                    for a in rng_n for b in rng_n)
            t3 += abs(D) ** 2
    for m in rng_n:
        rX = sum(X[a] * sum(S[a, m, c, c] for c in rng_n) for a in rng_n)
        SX = sum(np.conj(X[b]) * S[m, b, c, d] * Y[c] * np.conj(Y[d])
                 for b in rng_n for c in rng_n for d in rng_n)
        rY = sum(Y[c] * sum(S[c, m, a, a] for a in rng_n) for c in rng_n)
        SY = sum(X[a] * np.conj(X[b]) * S[a, b, m, d] * np.conj(Y[d])
                 for a in rng_n for b in rng_n for d in rng_n)
        t4 += np.real(rX * SX + rY * SY)
    return t1 - t2 + t3 - t4


# -- tensor container and bisectional values --------------------------------

def test_symmetry_residual_gram_tensor_exact():
    t = pos.CurvatureTypeTensor(_gram_tensor(2), np.eye(2, dtype=complex))
    assert t.symmetry_residual() < 1e-12


def test_symmetry_residual_detects_broken_tensor():
    S = _gram_tensor(2)
    S[0, 1, 0, 0] += 0.5
    t = pos.CurvatureTypeTensor(S, np.eye(2, dtype=complex))
    assert t.symmetry_residual() > 0.1


def test_point_count_mismatch_raises():
    g = np.tile(np.eye(2, dtype=complex), (3, 1, 1))
    with pytest.raises(IncompatibleClass):
        pos.CurvatureTypeTensor(np.zeros((2, 2, 2, 2, 2), complex), g)


def test_bisectional_flat_zero():
    t = pos.CurvatureTypeTensor.zero(np.eye(2, dtype=complex))
    assert pos.bisectional(t, [1.0, 0.0], [0.0, 1.0]) == 0.0


def test_bisectional_constant_curvature_pairs():
    t = pos.CurvatureTypeTensor.constant_curvature(np.eye(2, dtype=complex),
                                                   2.0)
    e0 = [1.0, 0.0]
    e1 = [0.0, 1.0]
    assert pos.bisectional(t, e0, e1) == pytest.approx(2.0, abs=1e-14)
    assert pos.bisectional(t, e0, e0) == pytest.approx(4.0, abs=1e-14)


def test_bisectional_profile_reduces_to_gauss_curvature():
    geom = ProfileGeometry.soliton(1, 3, 64)
    t = pos.CurvatureTypeTensor.from_profile(geom)
    K = geom.gauss_K()
    R = geom.R_transverse()
    for j in (0, 17, 40, 63):
        v = pos.bisectional(t, [1.0], [1.0], point=j)
        assert v == pytest.approx(K[j], rel=1e-13)
        assert v == pytest.approx(0.5 * R[j], rel=1e-13)


def test_bisectional_zero_vector_raises():
    t = pos.CurvatureTypeTensor.zero(np.eye(2, dtype=complex))
    with pytest.raises(ZeroVector):
        pos.bisectional(t, [0.0, 0.0], [1.0, 0.0])


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_bisectional_real_phase_scale_invariant(seed):
    rng = np.random.default_rng(seed)
    t = pos.CurvatureTypeTensor(_gram_tensor(3, seed=seed),
                                np.eye(3, dtype=complex))
    V = _rand_vec(3, rng)
    U = _rand_vec(3, rng)
    v0 = pos.bisectional(t, V, U)
    assert isinstance(v0, float)
    th, ph = rng.uniform(0.0, 2 * np.pi, 2)
    a, b = rng.uniform(0.1, 10.0, 2)
    v1 = pos.bisectional(t, a * np.exp(1j * th) * V, b * np.exp(1j * ph) * U)
    assert v1 == pytest.approx(v0, rel=1e-10, abs=1e-12)
    # conjugation symmetry of the curvature type: swapping the planes
    assert pos.bisectional(t, U, V) == pytest.approx(v0, rel=1e-10,
                                                     abs=1e-12)


def test_min_bisectional_constant_curvature_orthogonal_floor():
    g = np.tile(np.eye(2, dtype=complex), (3, 1, 1))
    t = pos.CurvatureTypeTensor.constant_curvature(g, 2.0)
    v, arg = pos.min_bisectional(t)
    # orthogonal pairs give 2, equal pairs 4; the minimum is the floor
    assert v == pytest.approx(2.0, abs=1e-6)
    assert v >= 2.0 - 1e-9
    assert {"point", "V", "U"} <= set(arg)


def test_min_bisectional_flat_zero():
    t = pos.CurvatureTypeTensor.zero(np.tile(np.eye(2, dtype=complex),
                                             (3, 1, 1)))
    v, _ = pos.min_bisectional(t)
    assert v == 0.0


def test_min_bisectional_flipped_block_located():
    g = np.tile(np.eye(2, dtype=complex), (2, 1, 1))
    S = pos.CurvatureTypeTensor.constant_curvature(g, 2.0).S.copy()
    S[1] = -S[1]
    v, arg = pos.min_bisectional(pos.CurvatureTypeTensor(S, g))
    assert arg["point"] == 1
    assert v == pytest.approx(-4.0, abs=1e-6)


# -- reaction term ----------------------------------------------------------

def test_reaction_zero_tensor():
    t = pos.CurvatureTypeTensor.zero(np.eye(3, dtype=complex))
    rng = np.random.default_rng(0)
    out = pos.reaction_F(t, [(_rand_vec(3, rng), _rand_vec(3, rng))])
    assert np.all(out == 0.0)


@pytest.mark.parametrize("n", [2, 3])
def test_reaction_matches_brute_force_loops(n):
    rng = np.random.default_rng(11 + n)
    t = pos.CurvatureTypeTensor(_gram_tensor(n, seed=5 * n),
                                np.eye(n, dtype=complex))
    pairs = [(_rand_vec(n, rng), _rand_vec(n, rng)) for _ in range(4)]
    got = pos.reaction_F(t, pairs)
    for m, (X, Y) in enumerate(pairs):
        want = brute_reaction(t.S[0], X / np.linalg.norm(X),
                              Y / np.linalg.norm(Y))
        assert got[0, m] == pytest.approx(want, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_reaction_constant_curvature_closed_form(n):
    # for lam (g g + g g) and unit X, Y the four groups collapse to
    # F = -lam^2 (n+1)(1 + |<X, Y>|^2) = -(n+1) lam S(X, Xb; Y, Yb)
    rng = np.random.default_rng(3)
    for lam in (2.0, 1.0 / (n + 1)):
        t = pos.CurvatureTypeTensor.constant_curvature(
            np.eye(n, dtype=complex), lam)
        X = _rand_vec(n, rng)
        Y = _rand_vec(n, rng)
        X = X / np.linalg.norm(X)
        Y = Y / np.linalg.norm(Y)
        a = abs(np.sum(X * np.conj(Y))) ** 2
        got = float(pos.reaction_F(t, [(X, Y)])[0, 0])
        assert got == pytest.approx(-lam * lam * (n + 1) * (1.0 + a),
                                    abs=1e-12)


def test_reaction_fixed_point_stationarity():
    # at lam = 1/(n+1) the reaction equals minus the tensor on every
    # diagonal pair, the stationarity of the curvature evolution
    for n in (1, 2, 3):
        lam = 1.0 / (n + 1)
        t = pos.CurvatureTypeTensor.constant_curvature(
            np.eye(n, dtype=complex), lam)
        rng = np.random.default_rng(n)
        for _ in range(3):
            X = _rand_vec(n, rng)
            Y = _rand_vec(n, rng)
            F = float(pos.reaction_F(t, [(X, Y)])[0, 0])
            S = pos.bisectional(t, X, Y)
            assert F == pytest.approx(-S, abs=1e-12)


def test_reaction_degenerate_metric_raises():
    g = np.diag([1.0, -1.0]).astype(complex)
    t = pos.CurvatureTypeTensor(np.zeros((2, 2, 2, 2), complex), g)
    with pytest.raises(FrameDegenerate):
        pos.reaction_F(t, [([1.0, 0.0], [0.0, 1.0])])


def test_reaction_zero_pair_raises():
    t = pos.CurvatureTypeTensor.zero(np.eye(2, dtype=complex))
    with pytest.raises(ZeroVector):
        pos.reaction_F(t, [([0.0, 0.0], [1.0, 0.0])])


# -- null vector condition --------------------------------------------------

def test_null_vector_condition_holds():
    worst = pos.null_vector_test(500, 2, seed=3)
    assert worst >= -1e-10


def test_null_vector_deterministic_and_n3():
    a = pos.null_vector_test(120, 2, seed=9)
    assert a == pos.null_vector_test(120, 2, seed=9)
    assert pos.null_vector_test(60, 3, seed=1) >= -1e-10


def test_null_vector_needs_trials():
    with pytest.raises(IncompatibleClass):
        pos.null_vector_test(0, 2)


# -- flow monitors ----------------------------------------------------------

def _dumbbell(N=64):
    """Waisted profile with negative curvature near the equator; the cone
    slopes at both poles match the round profile."""
    geom = ProfileGeometry.round_fixed_point(N)
    mu = geom.mu
    psi = mu * (2.0 - mu) * (1.0 - 0.7 * np.sin(0.5 * np.pi * mu) ** 2)
    return geom.with_psi(psi)


class _StaticTrajectory:
    """Minimal stand-in: a list of geometries at given times."""

    def __init__(self, geoms, times):
        self.geoms = geoms
        self.times = list(times)
        self.mu = geoms[0].mu

    def geometry_at(self, k):
        return self.geoms[k]


def test_positivity_monitor_fixed_point_constant():
    state = FlowState(ProfileGeometry.round_fixed_point(64), tau0=1.0)
    traj = run(state, 0.5, checkpoint_dt=0.25)
    rep = pos.positivity_monitor(traj)
    assert rep["initially_nonnegative"]
    assert rep["stays_nonnegative"]
    assert np.max(np.abs(rep["min_bisectional"] - 1.0)) < 1e-10
    assert rep["first_positive_time"] == 0.0


def test_positivity_monitor_football_run_green():
    state = FlowState(ProfileGeometry.football(2, 3, 64), tau0=1.0)
    traj = run(state, 2.0, checkpoint_dt=0.5)
    rep = pos.positivity_monitor(traj)
    assert rep["stays_nonnegative"]
    assert np.min(rep["min_bisectional"]) > 0.0


def test_positivity_monitor_reports_outside_hypothesis():
    d = _dumbbell()
    assert float(np.min(d.gauss_K())) < 0.0
    traj = _StaticTrajectory([d, d], [0.0, 1.0])
    rep = pos.positivity_monitor(traj)
    assert not rep["initially_nonnegative"]
    assert not rep["stays_nonnegative"]


def test_positivity_monitor_raises_on_lost_positivity():
    good = ProfileGeometry.round_fixed_point(64)
    traj = _StaticTrajectory([good, _dumbbell()], [0.0, 1.0])
    with pytest.raises(LowerBoundViolated):
        pos.positivity_monitor(traj)


# -- soliton detection ------------------------------------------------------

def test_soliton_residual_einstein_constant_potential():
    geom = ProfileGeometry.round_fixed_point(128)
    e, h = pos.soliton_residual(geom, np.full(geom.N, 3.7))
    assert e < 1e-12
    assert h == 0.0


def test_soliton_residual_nonconstant_f_positive_holo():
    geom = ProfileGeometry.round_fixed_point(128)
    rng = np.random.default_rng(2)
    _, h = pos.soliton_residual(geom, rng.standard_normal(geom.N))
    assert h > 0.0


def test_soliton_residual_sampled_profile_first_order():
    vals = []
    for N in (128, 256):
        e, h = pos.soliton_residual(ProfileGeometry.soliton(1, 3, N))
        assert e < 1e-10
        vals.append(h)
    assert vals[1] < 7e-3
    assert vals[0] / vals[1] == pytest.approx(2.0, rel=0.25)


def test_soliton_residual_flow_steady_state_machine_level():
    state = FlowState(ProfileGeometry.football(2, 3, 64), tau0=1.0)
    traj = run(state, 12.0, checkpoint_dt=6.0)
    e, h = pos.soliton_residual(traj.geometry_at(-1))
    assert e < 1e-8
    assert h < 1e-8


def test_soliton_shoot_matches_closed_form():
    for p, q in ((1, 3), (2, 3)):
        mu = np.linspace(0.0, 1.0 / p + 1.0 / q, 301)
        diff = pos.soliton_shoot(p, q, mu) - soliton_profile(mu, p, q)
        assert np.max(np.abs(diff)) < 1e-8


def test_soliton_shoot_equal_cones_is_parabola():
    mu = np.linspace(0.0, 1.0, 201)
    diff = pos.soliton_shoot(2, 2, mu) - (mu - mu ** 2)
    assert np.max(np.abs(diff)) < 1e-12


# -- constant curvature detection -------------------------------------------

def _fs_chart(M, extent=0.8, a=1.0):
    h = 2.0 * extent / M
    origin = np.array([-extent, -extent])
    x = origin[0] + h * np.arange(M)
    X, Y = np.meshgrid(x, x, indexing="ij")
    G = 0.5 * a * np.log(1.0 + X ** 2 + Y ** 2)
    return gc.build_chart(G, 1, {"kind": "pole"}, spacing=h, origin=origin)


def _windowed_tensor(chart, margin=6):
    curv = gc.curvature(gc.metric_from_chart(chart))
    win = chart.interior_window(margin)
    return pos.CurvatureTypeTensor(curv.riem[win], curv.metric.g[win])


def test_detector_normalized_sphere_second_order():
    d32 = pos.constant_curvature_detector(_windowed_tensor(_fs_chart(32)))
    d64 = pos.constant_curvature_detector(_windowed_tensor(_fs_chart(64)))
    assert d64 < 0.03
    assert d32 / d64 == pytest.approx(4.0, rel=0.2)


def test_detector_flat_chart_maximal_mismatch():
    t = pos.CurvatureTypeTensor.zero(np.eye(1, dtype=complex))
    assert pos.constant_curvature_detector(t) == 4.0


def test_detector_homothety_restores_normalization():
    chart = _fs_chart(64, a=2.0)
    off = pos.constant_curvature_detector(_windowed_tensor(chart))
    assert off > 1.0
    back = pos.constant_curvature_detector(
        _windowed_tensor(gc.d_homothetic(chart, 0.5)))
    assert back < 0.03


def test_detector_soliton_not_einstein():
    t = pos.CurvatureTypeTensor.from_profile(ProfileGeometry.soliton(1, 3,
                                                                     128))
    assert pos.constant_curvature_detector(t) > 0.5
