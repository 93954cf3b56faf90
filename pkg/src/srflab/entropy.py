"""Weighted entropy functional, its minimization, and coupled monotonicity.

Two normalizations of the same functional are used side by side:

* the Riemannian form (scalar curvature R^T = -psi'', |grad f|^2 = psi f'^2)
  backs the direct evaluation / minimization API, and
* the analytic ("hatted") form (curvature and gradients measured with the
  half metric) backs the monotonicity bookkeeping, where the time derivative
  of the entropy equals a sum of two manifestly nonnegative integrals.

The two are related by mu_R(g, tau) = mu_hat(g, 2 tau) + n log 2; reported
mu series use mu_hat + n so the round fixed point sits at 2n + log V in both
conventions.

All scalar transports on the fixed momentum grid carry the advection term
-V d/dmu (the momentum frame preserves the area element, so the frame drift
relative to the evolving geometry shows up as a transport velocity).  With
that term the backward equation for w and the forward companion equation for
h conserve the pairing tau^{-n} int w h dV exactly in the continuum:
integration by parts turns the advection pair into V' w h = (1 - R-hat) w h,
which is precisely the volume-element evolution rate.
"""

import math

import numpy as np
from scipy import optimize

from . import kernels
from .errors import (ConstraintUnsatisfiable, InsufficientCheckpoints,
                     MaxIterations, NegativeEvolution, NegativeMinimizer,
                     NonPositiveTau, SolverDiverged, TrajectoryGap)

TWO_PI = 2.0 * np.pi

# complex transverse dimension of the production path
N_DIM = 1

_LOG_FLOOR = 1e-300


class EntropyState:
    """Evaluated entropy data at one time slice."""

    def __init__(self, f, tau, W_value, constraint_residual):
        self.f = f
        self.w = np.exp(-0.5 * f)
        self.tau = tau
        self.W_value = W_value
        self.constraint_residual = constraint_residual


class EntropyReport:
    """Result of an entropy minimization."""

    def __init__(self, mu_estimate, euler_lagrange_residual, minimizer_w,
                 iterations):
        self.mu_estimate = mu_estimate
        self.euler_lagrange_residual = euler_lagrange_residual
        self.minimizer_w = minimizer_w
        self.iterations = iterations


# ---------------------------------------------------------------------------
# the functional
# ---------------------------------------------------------------------------

def _ops(geom, hat):
    if hat:
        return geom.R_hat(), geom.lap_hat, geom.grad2_hat
    return geom.R_transverse(), geom.lap_LB, geom.grad2_R


def normalize_f(geom, f, tau):
    """Shift f by a constant so tau^{-n} int e^{-f} dV = 1."""
    if not tau > 0.0:
        raise NonPositiveTau("tau must be positive")
    f = np.asarray(f, float)
    with np.errstate(over="ignore"):
        mass = tau ** (-N_DIM) * geom.integrate(np.exp(-f))
    if not (np.isfinite(mass) and mass > 0.0):
        raise ConstraintUnsatisfiable(
            "cannot normalize: int e^{-f} dV overflowed or vanished")
    return f + math.log(mass)


def W_eval(geom, f, tau=1.0, hat=False, normalize=True):
    """Evaluate the entropy tau^{-n} int [tau(R + |grad f|^2) + f] e^{-f} dV.

    The additive constant of f is fixed by the unit-mass constraint when
    ``normalize`` is set (the default).
    """
    if normalize:
        f = normalize_f(geom, f, tau)
    else:
        f = np.asarray(f, float)
    R, _, grad2 = _ops(geom, hat)
    u = np.exp(-f)
    theta = tau ** (-N_DIM)
    W = theta * geom.integrate((tau * (R + grad2(f)) + f) * u)
    resid = theta * geom.integrate(u) - 1.0
    return EntropyState(f, tau, W, resid)


def W_gradient(geom, f, tau=1.0, hat=False):
    """Exact gradient of the unconstrained discrete functional with respect
    to f, as a density against dV: pairing int grad * delta_f dV.

    The gradient-squared term is differentiated through the same discrete
    difference stencils the functional uses, so finite differences of
    W_eval(..., normalize=False) match to rounding, not just to O(h^2).
    """
    f = np.asarray(f, float)
    R, _, grad2 = _ops(geom, hat)
    u = np.exp(-f)
    fac = 0.5 if hat else 1.0
    direct = u * (1.0 - tau * R - tau * grad2(f) - f)
    return tau ** (-N_DIM) * (direct
                              + tau * fac * geom.grad2_adjoint(f, u))


# ---------------------------------------------------------------------------
# minimization over the constraint sphere
# ---------------------------------------------------------------------------

def mu_minimize(geom, tau=1.0, tol=1e-6, hat=False, seeds=5, max_iter=2000):
    """Minimize the entropy over f at fixed tau; returns an EntropyReport.

    Works in the substitution w = e^{-f/2}: the functional becomes
    theta int [tau(4 |grad w|^2 + R w^2) - w^2 log w^2] dV on the sphere
    theta int w^2 dV = 1, and the critical equation reads
    4 tau lap(w) + w log w^2 - tau R w + mu w = 0 with mu the value.
    Quasi-Newton descent from the constant state plus ``seeds`` random
    starts; the best minimizer is kept.
    """
    R, lap, _ = _ops(geom, hat)
    a = geom.cell_measure()
    shape = np.shape(R)
    theta = tau ** (-N_DIM)

    def value_grad(v):
        v = v.reshape(shape)
        c = math.sqrt(theta * float(np.sum(a * v * v)))
        w = v / c
        lw = lap(w)
        w2 = w * w
        logw2 = np.log(np.maximum(w2, _LOG_FLOOR))
        val = theta * float(np.sum(a * (-4.0 * tau * w * lw + tau * R * w2
                                        - w2 * logw2)))
        G = theta * (-8.0 * tau * lw + 2.0 * tau * R * w
                     - 2.0 * w * logw2 - 2.0 * w)
        proj = G - theta * float(np.sum(a * G * w)) * w
        return val, (a * proj / c).ravel()

    def residual(w, mu):
        r = (4.0 * tau * lap(w) + w * np.log(np.maximum(w * w, _LOG_FLOOR))
             - tau * R * w + mu * w)
        return float(np.max(np.abs(r)))

    def polish(w, mu):
        # Newton-Krylov on the critical equation plus the sphere constraint;
        # sharpens the strong-norm residual the quasi-Newton stage leaves
        def F(x):
            wv = x[:-1].reshape(shape)
            m = x[-1]
            r = (4.0 * tau * lap(wv)
                 + wv * np.log(np.maximum(wv * wv, _LOG_FLOOR))
                 - tau * R * wv + m * wv)
            con = theta * float(np.sum(a * wv * wv)) - 1.0
            return np.concatenate([r.ravel(), [con]])

        x0 = np.concatenate([w.ravel(), [mu]])
        try:
            sol = optimize.root(F, x0, method="krylov",
                                options={"fatol": 0.01 * tol, "maxiter": 60,
                                         "disp": False})
        except Exception:
            return w, mu
        wv = np.abs(sol.x[:-1].reshape(shape))
        m = float(sol.x[-1])
        c = math.sqrt(theta * float(np.sum(a * wv * wv)))
        if not (np.isfinite(c) and c > 0.0):
            return w, mu
        return wv / c, m

    starts = [np.ones(shape)]
    for k in range(seeds):
        rng = np.random.default_rng(1000 + k)
        starts.append(np.abs(1.0 + 0.4 * rng.standard_normal(shape)) + 0.01)

    best = None
    iters = 0
    for v0 in starts:
        x = v0.ravel()
        r_prev = np.inf
        for restart in range(6):
            res = optimize.minimize(value_grad, x, jac=True,
                                    method="L-BFGS-B",
                                    options={"maxiter": max_iter,
                                             "ftol": 1e-17, "gtol": 1e-13})
            iters += res.nit
            x = res.x
            v = np.abs(x.reshape(shape))
            c = math.sqrt(theta * float(np.sum(a * v * v)))
            w = v / c
            mu = value_grad(v.ravel())[0]
            r = residual(w, mu)
            if r <= 0.1 * tol or r > 0.5 * r_prev:
                break
            r_prev = r
        if r > 0.1 * tol:
            w2, mu2 = polish(w, mu)
            mu2 = value_grad(w2.ravel())[0]
            r2 = residual(w2, mu2)
            if r2 < r:
                w, mu, r = w2, mu2, r2
        if best is None or mu < best[0] - 1e-14 or \
                (abs(mu - best[0]) <= 1e-14 and r < best[1]):
            best = (mu, r, w)

    mu, r, w = best
    if not np.all(w > 0.0):
        raise NegativeMinimizer("minimizer is not strictly positive")
    if r > tol:
        raise MaxIterations(
            "descent stalled: residual %.3e > tol %.3e" % (r, tol))
    return EntropyReport(mu, r, w, iters)


# ---------------------------------------------------------------------------
# the time scale
# ---------------------------------------------------------------------------

def tau_evolve(tau0, t):
    """tau(t) = (tau0 - 1) e^t + 1, solving dtau/dt = tau - 1."""
    if not tau0 > 0.0:
        raise NonPositiveTau("tau0 must be positive")
    val = (tau0 - 1.0) * math.exp(t) + 1.0
    if not val > 0.0:
        raise NonPositiveTau("tau(t) reached zero at t = %.6g" % t)
    return val


# ---------------------------------------------------------------------------
# heat transport along a trajectory
# ---------------------------------------------------------------------------

def _psi_at(trajectory, t):
    times = trajectory.times
    if t <= times[0]:
        return trajectory.snapshots[0]["psi"]
    if t >= times[-1]:
        return trajectory.snapshots[-1]["psi"]
    k = int(np.searchsorted(times, t, side="right")) - 1
    t0, t1 = times[k], times[k + 1]
    th = (t - t0) / (t1 - t0)
    return ((1.0 - th) * trajectory.snapshots[k]["psi"]
            + th * trajectory.snapshots[k + 1]["psi"])


def _interval_steps(trajectory, psi_a, psi_b, span, alpha):
    h = trajectory.h
    psimax = max(float(np.max(psi_a)), float(np.max(psi_b)), 1e-12)
    ga = trajectory.geometry_at(0).with_psi(psi_a)
    gb = trajectory.geometry_at(0).with_psi(psi_b)
    vmax = max(float(np.max(np.abs(ga.advection_V()))),
               float(np.max(np.abs(gb.advection_V()))), 1e-12)
    dt = min(0.1 * h * h / (alpha * psimax), 0.25 * h / vmax)
    nsteps = max(1, int(math.ceil(span / dt)))
    return span / nsteps, nsteps


def _check_span(trajectory, T):
    times = trajectory.times
    if len(times) < 2:
        raise InsufficientCheckpoints("need at least two checkpoints")
    if times[0] > 1e-12 or T > times[-1] + 1e-9:
        raise TrajectoryGap(
            "trajectory covers [%.6g, %.6g], requested horizon %.6g"
            % (times[0], times[-1], T))


def backward_heat(trajectory, w_T, T, tau0=1.0, hat=False):
    """Transport w backward from time T to 0 along the trajectory.

    In the substitution s = T - t the equation is
    dw/ds = alpha lap(w) - c_R R^T w + n w / tau(t) + V w', with
    (alpha, c_R) = (1, 1) in the Riemannian form and (1/2, 1/2) in the
    hatted form.  Metric profiles are interpolated linearly in t between
    checkpoints.  Returns {"times": [...], "w": [...]} at the checkpoint
    times below T (plus T itself), in increasing time order.
    """
    _check_span(trajectory, T)
    w_T = np.asarray(w_T, float)
    if w_T.shape != trajectory.mu.shape:
        raise TrajectoryGap("terminal data does not match the grid")
    alpha = 0.5 if hat else 1.0
    cR = -alpha
    nonneg = bool(np.all(w_T >= 0.0))

    ts = [t for t in trajectory.times if t < T - 1e-12] + [min(T,
          trajectory.times[-1])]
    w = w_T.copy()
    out_t = [ts[-1]]
    out_w = [w.copy()]
    for i in range(len(ts) - 1, 0, -1):
        t_hi, t_lo = ts[i], ts[i - 1]
        psi_hi = np.ascontiguousarray(_psi_at(trajectory, t_hi))
        psi_lo = np.ascontiguousarray(_psi_at(trajectory, t_lo))
        sa, sb = T - t_hi, T - t_lo
        dt, nsteps = _interval_steps(trajectory, psi_hi, psi_lo,
                                     sb - sa, alpha)
        rc = kernels.heat_block(w, psi_hi, psi_lo, trajectory.mu, sa, sb,
                                trajectory.h, trajectory.p, trajectory.q,
                                dt, nsteps, alpha, 1.0, 0.0, cR,
                                float(N_DIM), tau0, T, sa, -1)
        if rc != 0:
            raise SolverDiverged("backward transport blew up in [%g, %g]"
                                 % (t_lo, t_hi))
        if nonneg and float(np.min(w)) < -1e-10:
            raise NegativeEvolution(
                "nonnegative data turned negative near t = %.6g" % t_lo)
        out_t.append(t_lo)
        out_w.append(w.copy())
    return {"times": out_t[::-1], "w": out_w[::-1]}


def forward_heat(trajectory, h0, T, tau0=1.0, hat=False):
    """Transport the companion field forward from 0 to T: the equation
    dh/dt = alpha lap(h) - (alpha/2) R^T_factor h - V h' conserving the
    pairing tau^{-n} int w h dV against backward solutions.

    Riemannian form: dh/dt = lap h - R^T h / 2 - V h'.
    Hatted form:     dh/dt = lap_hat h - V h'.
    """
    _check_span(trajectory, T)
    h0 = np.asarray(h0, float)
    alpha = 0.5 if hat else 1.0
    cR = 0.0 if hat else -0.5

    ts = [0.0] + [t for t in trajectory.times if 1e-12 < t < T - 1e-12] + [T]
    h = h0.copy()
    out_t = [0.0]
    out_h = [h.copy()]
    for i in range(len(ts) - 1):
        t_lo, t_hi = ts[i], ts[i + 1]
        psi_lo = np.ascontiguousarray(_psi_at(trajectory, t_lo))
        psi_hi = np.ascontiguousarray(_psi_at(trajectory, t_hi))
        dt, nsteps = _interval_steps(trajectory, psi_lo, psi_hi,
                                     t_hi - t_lo, alpha)
        rc = kernels.heat_block(h, psi_lo, psi_hi, trajectory.mu, t_lo, t_hi,
                                trajectory.h, trajectory.p, trajectory.q,
                                dt, nsteps, alpha, -1.0, 0.0, cR,
                                0.0, tau0, T, t_lo, 1)
        if rc != 0:
            raise SolverDiverged("forward transport blew up in [%g, %g]"
                                 % (t_lo, t_hi))
        out_t.append(t_hi)
        out_h.append(h.copy())
    return {"times": out_t, "h": out_h}


# ---------------------------------------------------------------------------
# coupled monotonicity
# ---------------------------------------------------------------------------

def coupled_monotonicity_check(trajectory, f_T, tau0=1.0, tol=1e-8,
                               tol_match=2e-2):
    """Entropy series along a coupled (metric, potential, tau) evolution.

    The potential is transported backward with the hatted conjugate
    equation; at each checkpoint the hatted entropy and the two
    nonnegative production integrals are evaluated:

      soliton_term = int (K + lap_hat f - 1/tau)^2 e^{-f} tau^{1-n} dV
      hessian_term = int (psi f''/2)^2 e^{-f} tau^{1-n} dV

    and dW/dt should match soliton_term + hessian_term.
    """
    times = np.asarray(trajectory.times, float)
    T = float(times[-1])
    f_T = normalize_f(trajectory.geometry_at(len(times) - 1), f_T,
                      tau_evolve(tau0, T))
    bw = backward_heat(trajectory, np.exp(-0.5 * f_T), T, tau0=tau0,
                       hat=True)
    W = []
    soliton = []
    hessian = []
    integrand_min = np.inf
    for k, t in enumerate(bw["times"]):
        geom = trajectory.geometry_at(k)
        tau = tau_evolve(tau0, t)
        w = bw["w"][k]
        if float(np.min(w)) <= 0.0:
            raise NegativeEvolution("transported density lost positivity")
        f = normalize_f(geom, -2.0 * np.log(w), tau)
        W.append(W_eval(geom, f, tau, hat=True, normalize=False).W_value)
        u = np.exp(-f)
        scale = tau ** (1 - N_DIM)
        s_int = scale * (geom.gauss_K() + geom.lap_hat(f) - 1.0 / tau) ** 2 * u
        h_int = scale * geom.holo_hess_hat(f) ** 2 * u
        integrand_min = min(integrand_min, float(np.min(s_int)),
                            float(np.min(h_int)))
        soliton.append(geom.integrate(s_int))
        hessian.append(geom.integrate(h_int))
    W = np.array(W)
    soliton = np.array(soliton)
    hessian = np.array(hessian)
    rhs = soliton + hessian
    dWdt = np.gradient(W, np.asarray(bw["times"]))
    interior = slice(1, -1)
    mismatch = np.abs(dWdt[interior] - rhs[interior]) / (1.0 + rhs[interior])
    return {
        "times": list(bw["times"]),
        "W": W,
        "dWdt_numeric": dWdt,
        "dWdt_formula": rhs,
        "soliton_term": soliton,
        "hessian_term": hessian,
        "integrand_min": integrand_min,
        "max_violation": float(np.max(-dWdt)),
        "max_mismatch": float(np.max(mismatch)) if mismatch.size else 0.0,
        "monotone_ok": bool(np.all(dWdt >= -tol)),
        "match_ok": bool(np.all(mismatch <= tol_match)),
    }


def mu_monotonicity_check(trajectory, tau0=1.0, tol=1e-6, seeds=1):
    """Minimized entropy mu(g(t), tau(t)) along a trajectory.

    Reported values follow the mu_hat + n convention, so the round fixed
    point sits at 2n + log V.  Requires at least two checkpoints; asserts
    the series is nondecreasing within 2 tol.
    """
    times = trajectory.times
    if len(times) < 2:
        raise InsufficientCheckpoints("need at least two checkpoints")
    mu = []
    residuals = []
    for k, t in enumerate(times):
        rep = mu_minimize(trajectory.geometry_at(k), tau_evolve(tau0, t),
                          tol=tol, hat=True, seeds=seeds)
        mu.append(rep.mu_estimate + N_DIM)
        residuals.append(rep.euler_lagrange_residual)
    mu = np.array(mu)
    drops = np.diff(mu)
    return {
        "times": list(times),
        "mu": mu,
        "residuals": residuals,
        "max_drop": float(-np.min(drops)),
        "nondecreasing": bool(np.all(drops >= -2.0 * tol)),
    }


def mu_homothety_table(geom, factors, tau=1.0, tol=1e-6):
    """Minimized entropy across a transverse homothety family.

    Reported as data only: no scaling law is asserted.
    """
    from .flow_engine import d_homothetic_profile
    rows = []
    for a in factors:
        ga = d_homothetic_profile(geom, a)
        rep = mu_minimize(ga, tau, tol=tol, hat=True)
        rows.append({"factor": float(a), "mu": rep.mu_estimate + N_DIM})
    return rows


def entropy_series(trajectory, f_T=None, tau0=1.0, mu_tol=1e-6):
    """Per-checkpoint entropy table: rows with keys
    (t, tau, W, mu, EL_residual, dWdt_numeric, dWdt_formula,
    soliton_term, hessian_term)."""
    times = trajectory.times
    if f_T is None:
        f_T = np.zeros(trajectory.mu.shape)
    coupled = coupled_monotonicity_check(trajectory, f_T, tau0=tau0)
    mono = mu_monotonicity_check(trajectory, tau0=tau0, tol=mu_tol)
    rows = []
    for k, t in enumerate(times):
        rows.append({
            "t": t,
            "tau": tau_evolve(tau0, t),
            "W": float(coupled["W"][k]),
            "mu": float(mono["mu"][k]),
            "EL_residual": float(mono["residuals"][k]),
            "dWdt_numeric": float(coupled["dWdt_numeric"][k]),
            "dWdt_formula": float(coupled["dWdt_formula"][k]),
            "soliton_term": float(coupled["soliton_term"][k]),
            "hessian_term": float(coupled["hessian_term"][k]),
        })
    return rows


# ---------------------------------------------------------------------------
# flat comparison geometry
# ---------------------------------------------------------------------------

class TorusChartGeometry:
    """Flat periodic transverse square with a trivial fiber.

    Metric gT (dx^2 + dy^2) on a side-L torus, fiber length l; curvature
    vanishes identically.  Implements the same scalar-operator protocol as
    the axisymmetric geometry, for entropy comparisons on a flat example.
    """

    def __init__(self, L=1.0, M=32, gT=1.0, l=1.0):
        self.L = float(L)
        self.M = int(M)
        self.gT = float(gT)
        self.l = float(l)
        self.h = self.L / self.M
        self.shape = (self.M, self.M)

    @property
    def volume(self):
        return self.l * self.gT * self.L ** 2

    def cell_measure(self):
        return np.full(self.shape, self.l * self.gT * self.h ** 2)

    def integrate(self, f):
        return self.l * self.gT * self.h ** 2 * float(np.sum(f))

    def R_transverse(self):
        return np.zeros(self.shape)

    def R_hat(self):
        return np.zeros(self.shape)

    def lap_LB(self, f):
        f = np.asarray(f, float)
        out = (np.roll(f, 1, 0) + np.roll(f, -1, 0) + np.roll(f, 1, 1)
               + np.roll(f, -1, 1) - 4.0 * f) / self.h ** 2
        return out / self.gT

    def lap_hat(self, f):
        return 0.5 * self.lap_LB(f)

    def grad2_R(self, f):
        f = np.asarray(f, float)
        fx = (np.roll(f, -1, 0) - np.roll(f, 1, 0)) / (2.0 * self.h)
        fy = (np.roll(f, -1, 1) - np.roll(f, 1, 1)) / (2.0 * self.h)
        return (fx * fx + fy * fy) / self.gT

    def grad2_hat(self, f):
        return 0.5 * self.grad2_R(f)

    def grad2_adjoint(self, f, weight):
        """Exact discrete gradient density of sum (fx^2 + fy^2) W / gT;
        the transpose of a centered periodic difference is its negative."""
        f = np.asarray(f, float)
        weight = np.asarray(weight, float)
        out = np.zeros(self.shape)
        for ax in (0, 1):
            d = (np.roll(f, -1, ax) - np.roll(f, 1, ax)) / (2.0 * self.h)
            m = 2.0 * d * weight / self.gT
            out -= (np.roll(m, -1, ax) - np.roll(m, 1, ax)) / (2.0 * self.h)
        return out
