"""Potential-form transverse Ricci flow on axisymmetric model geometries.

The production path evolves the cohomogeneity-one profile psi(mu) of
profile_geom with the hot kernels in kernels.py:

    d psi / dt = psi + (1/2) psi psi'' - V psi',   V = mu + psi'/2 - 1/p,

together with the transported coordinate m0 (the grid's Lagrangian label in
the initial geometry) and the flow potential phi, whose rate is the
potential equation log det ratio + phi - F read through m0.  The momentum
coordinate keeps the leaf area (hence the total volume) exactly constant.

Monitors follow the scalar conventions of profile_geom: analytic Laplacian
lap_hat = (psi f')'/2, transverse scalar R^T = -psi''.  On the fixed grid
the evolution identities pick up the advection term -V d/dmu:

    du/dt  = lap_hat u + u + A - V u',
    dR^T/dt = lap_hat R^T - R^T + (R^T)^2/2 - V (R^T)',

where (R^T)^2/2 = |Ric^T|^2 for a two-dimensional leaf space.  Dropping the
Laplacian and advection terms in the scalar identity gives the comparison
ODE r' = -r + r^2/2 whose solution bounds min R^T from below.
"""

import numpy as np

from . import kernels
from .errors import (IncompatibleClass, InsufficientCheckpoints,
                     LowerBoundViolated, MetricDegenerated,
                     NonPositiveParameter, StepRejected)
from .profile_geom import ProfileGeometry

DT_DIFFUSIVE = 0.2
DT_ADVECTIVE = 0.5
MAX_HALVINGS = 8


# ---------------------------------------------------------------------------
# background field and stability bound
# ---------------------------------------------------------------------------

def compute_F(geom):
    """Background potential F with lap_hat F = K - 1, mean zero.

    K - 1 is the trace of (Ricci form - transverse Kahler form); its leaf
    integral vanishes exactly when mu_max = 1/p + 1/q (the normalized
    class), which the radial solve enforces.  At a transverse-Einstein
    fixed point K = 1 and F vanishes identically.
    """
    F = geom.solve_radial_poisson(geom.gauss_K() - 1.0)
    return F - geom.integrate(F) / geom.volume


def stability_dt(geom):
    """Parabolic/advective step bound for the explicit integrator."""
    dt_diff = DT_DIFFUSIVE * geom.h ** 2 / float(np.max(geom.psi))
    vmax = float(np.max(np.abs(geom.advection_V())))
    if vmax > 0.0:
        return min(dt_diff, DT_ADVECTIVE * geom.h / vmax)
    return dt_diff


def _node_array(geom, cells, pole_values="zero"):
    """Cell values extended to the interpolation nodes with pole anchors."""
    out = np.empty(geom.N + 2)
    out[1:-1] = cells
    if pole_values == "zero":
        out[0] = 0.0
        out[-1] = 0.0
    else:  # quadratic extrapolation to the pole faces
        out[0] = (15.0 * cells[0] - 10.0 * cells[1] + 3.0 * cells[2]) / 8.0
        out[-1] = (15.0 * cells[-1] - 10.0 * cells[-2] + 3.0 * cells[-3]) / 8.0
    return out


# ---------------------------------------------------------------------------
# state and trajectory
# ---------------------------------------------------------------------------

class FlowState:
    """Single-writer state of one profile flow run."""

    def __init__(self, geom, tau0=2.0):
        if not tau0 > 0.0:
            raise NonPositiveParameter("tau0 must be positive")
        self.p = geom.p
        self.q = geom.q
        self.mu_max = geom.mu_max
        self.l = geom.l
        self.h = geom.h
        self.mu = geom.mu.copy()
        self.psi = geom.psi.copy()
        self.m0 = geom.mu.copy()
        self.phi = np.zeros(geom.N)
        F0 = compute_F(geom)
        self.F_background = F0
        self.psi0_nodes = _node_array(geom, geom.psi, "zero")
        self.F0_nodes = _node_array(geom, F0, "extrapolate")
        self.t = 0.0
        self.tau0 = float(tau0)
        self.volume = geom.volume
        self.u, self.A = geom.ricci_potential()

    @property
    def geom(self):
        return ProfileGeometry(self.psi, self.p, self.q, self.mu_max, self.l)

    @property
    def tau(self):
        return (self.tau0 - 1.0) * np.exp(self.t) + 1.0

    def snapshot(self):
        return {
            "t": self.t,
            "psi": self.psi.copy(),
            "phi": self.phi.copy(),
            "m0": self.m0.copy(),
            "u": self.u.copy(),
            "A": self.A,
            "volume": self.volume,
        }


class FlowTrajectory:
    """Append-only checkpoint record of one run."""

    def __init__(self, state):
        self.p = state.p
        self.q = state.q
        self.mu_max = state.mu_max
        self.l = state.l
        self.h = state.h
        self.mu = state.mu.copy()
        self.times = []
        self.snapshots = []
        self.monitor = []

    def append(self, state, b_const):
        if self.times and state.t <= self.times[-1]:
            raise InsufficientCheckpoints("checkpoint times must increase")
        self.times.append(state.t)
        self.snapshots.append(state.snapshot())
        self.monitor.append(monitor_row(state, b_const))

    def geometry_at(self, k):
        snap = self.snapshots[k]
        return ProfileGeometry(snap["psi"], self.p, self.q, self.mu_max,
                               self.l)


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def ricci_potential_update(state):
    """Refresh (u, A) from the current metric; returns the pair."""
    state.u, state.A = state.geom.ricci_potential()
    return state.u, state.A


def step(state, dt):
    """Advance one explicit step of size dt (mutates state).

    Raises StepRejected (with a suggested dt) when dt exceeds the stability
    bound or the profile degenerates within the step.
    """
    bound = stability_dt(state.geom)
    if dt > 1.0000001 * bound:
        raise StepRejected("dt %.3e above stability bound %.3e" % (dt, bound),
                           suggested_dt=bound)
    saved = (state.psi.copy(), state.m0.copy(), state.phi.copy())
    rc = kernels.step_block(state.psi, state.m0, state.phi, state.mu,
                            state.h, state.p, state.q, state.psi0_nodes,
                            state.F0_nodes, dt, 1)
    if rc != 0:
        state.psi, state.m0, state.phi = saved
        raise StepRejected("profile lost positivity", suggested_dt=0.5 * dt)
    state.t += dt
    ricci_potential_update(state)
    return state


def run(state, t_end, checkpoint_dt=0.25, b_const=None, trajectory=None):
    """Run to t_end with checkpoints at multiples of checkpoint_dt.

    Degenerate blocks are retried with halved dt up to 8 times, after which
    MetricDegenerated propagates.  Returns the trajectory.
    """
    if b_const is None:
        b_const = default_b_const(state)
    if trajectory is None:
        trajectory = FlowTrajectory(state)
        trajectory.append(state, b_const)
    while state.t < t_end - 1e-12:
        span = min(checkpoint_dt, t_end - state.t)
        dt = stability_dt(state.geom)
        nsteps = max(1, int(np.ceil(span / dt)))
        ok = False
        for _ in range(MAX_HALVINGS):
            saved = (state.psi.copy(), state.m0.copy(), state.phi.copy())
            rc = kernels.step_block(state.psi, state.m0, state.phi,
                                    state.mu, state.h, state.p, state.q,
                                    state.psi0_nodes, state.F0_nodes,
                                    span / nsteps, nsteps)
            if rc == 0:
                ok = True
                break
            state.psi, state.m0, state.phi = saved
            nsteps *= 2
        if not ok:
            raise MetricDegenerated(
                "profile degenerated at t=%.4f after %d halvings"
                % (state.t, MAX_HALVINGS))
        state.t += span
        ricci_potential_update(state)
        trajectory.append(state, b_const)
    return trajectory


# ---------------------------------------------------------------------------
# monitors
# ---------------------------------------------------------------------------

def default_b_const(state):
    """Running lower-bound constant for the gradient monitors."""
    return max(1.0, 1.0 - float(np.min(state.u)))


def gradient_bound_monitor(state, b_const):
    """(H_max, K_max) = max of |grad u|^2/(u+2B) and R^T/(u+2B)."""
    geom = state.geom
    denom = state.u + 2.0 * b_const
    if np.min(denom) <= 0.0:
        raise LowerBoundViolated("u + 2B nonpositive (min %.3e)"
                                 % float(np.min(denom)))
    h_max = float(np.max(geom.grad2_R(state.u) / denom))
    k_max = float(np.max(geom.R_transverse() / denom))
    return h_max, k_max


MONITOR_COLUMNS = ("t", "Rt_min", "Rt_max", "grad_u_max", "u_min", "u_max",
                   "A", "volume", "H_max", "K_max")


def monitor_row(state, b_const):
    geom = state.geom
    rt = geom.R_transverse()
    h_max, k_max = gradient_bound_monitor(state, b_const)
    return (state.t, float(np.min(rt)), float(np.max(rt)),
            float(np.max(geom.grad2_R(state.u))), float(np.min(state.u)),
            float(np.max(state.u)), state.A, state.volume, h_max, k_max)


def _pole_margin_slice(geom, margin):
    """Cells with margin * mu_max < mu < (1 - margin) * mu_max.

    The momentum coordinate degenerates at the poles (psi -> 0), where the
    pointwise evolution identities pick up a 1/psi amplification of the
    O(h^2) discretization error; the convergence-order monitors therefore
    measure a fixed interior region.
    """
    if margin <= 0.0:
        return np.ones(geom.N, dtype=bool)
    return ((geom.mu > margin * geom.mu_max)
            & (geom.mu < (1.0 - margin) * geom.mu_max))


def potential_evolution_residual(trajectory, k=None, margin=0.1):
    """Residual of du/dt = lap_hat u + u + A - V u' at checkpoint k.

    Uses a centered time difference of the stored u series; k defaults to
    the middle checkpoint.  Needs at least three checkpoints.  Max norm
    over the interior region (see _pole_margin_slice).
    """
    if len(trajectory.times) < 3:
        raise InsufficientCheckpoints("need >= 3 checkpoints")
    if k is None:
        k = len(trajectory.times) // 2
    k = max(1, min(k, len(trajectory.times) - 2))
    tm, t0, tp = (trajectory.times[k - 1], trajectory.times[k],
                  trajectory.times[k + 1])
    um = trajectory.snapshots[k - 1]["u"]
    u0 = trajectory.snapshots[k]["u"]
    up = trajectory.snapshots[k + 1]["u"]
    du_dt = (up - um) / (tp - tm)
    geom = trajectory.geometry_at(k)
    # advection V u' = psi u'^2 / 2 through the face slopes, matching the
    # kernel discretization (keeps the pole cells at interior accuracy)
    s = geom.u_mu_faces()
    sbar = 0.5 * (s[:-1] + s[1:])
    rhs = (geom.lap_hat(u0) + u0 + trajectory.snapshots[k]["A"]
           - 0.5 * geom.psi * sbar * sbar)
    keep = _pole_margin_slice(geom, margin)
    return float(np.max(np.abs((du_dt - rhs)[keep])))


def scalar_evolution_residual(trajectory, k=None, margin=0.1):
    """Residual of dR^T/dt = lap_hat R^T - R^T + (R^T)^2/2 - V (R^T)'.

    Max norm over the interior region (see _pole_margin_slice)."""
    if len(trajectory.times) < 3:
        raise InsufficientCheckpoints("need >= 3 checkpoints")
    if k is None:
        k = len(trajectory.times) // 2
    k = max(1, min(k, len(trajectory.times) - 2))
    tm, tp = trajectory.times[k - 1], trajectory.times[k + 1]
    rm = trajectory.geometry_at(k - 1).R_transverse()
    g0 = trajectory.geometry_at(k)
    rp = trajectory.geometry_at(k + 1).R_transverse()
    r0 = g0.R_transverse()
    dr_dt = (rp - rm) / (tp - tm)
    rhs = (g0.lap_hat(r0) - r0 + 0.5 * r0 * r0
           - g0.advection_V() * g0.d_mu(r0))
    keep = _pole_margin_slice(g0, margin)
    return float(np.max(np.abs((dr_dt - rhs)[keep])))


def min_scalar_comparison(r0, t):
    """Lower-bound ODE curve r' = -r + r^2/2 through r(0) = r0."""
    return 1.0 / (0.5 + (1.0 / r0 - 0.5) * np.exp(t))


def min_scalar_violation(trajectory):
    """Worst undershoot of min R^T against its ODE comparison curve."""
    r0 = float(np.min(trajectory.geometry_at(0).R_transverse()))
    worst = 0.0
    for k, t in enumerate(trajectory.times):
        rmin = float(np.min(trajectory.geometry_at(k).R_transverse()))
        worst = max(worst, min_scalar_comparison(r0, t) - rmin)
    return worst


# ---------------------------------------------------------------------------
# homothety and the Reeb family experiment
# ---------------------------------------------------------------------------

def d_homothetic_profile(geom, a):
    """Transverse homothety: psi_a(mu) = a psi(mu/a) on [0, a mu_max].

    Cone slopes are preserved; leaf area and fiber length scale by a.
    """
    if not a > 0.0:
        raise NonPositiveParameter("homothety parameter must be positive")
    new_max = a * geom.mu_max
    h = new_max / geom.N
    mu = (np.arange(geom.N) + 0.5) * h
    nodes_x = np.concatenate(([0.0], geom.mu, [geom.mu_max]))
    nodes_f = np.concatenate(([0.0], geom.psi, [0.0]))
    psi = a * np.interp(mu / a, nodes_x, nodes_f)
    return ProfileGeometry(psi, geom.p, geom.q, new_max, l=a * geom.l)


def _reduce_ratio(w1, w2):
    """Weight pair -> reduced rational ratio (relabeling invariance)."""
    from fractions import Fraction
    fr = Fraction(w1) / Fraction(w2)
    return fr.numerator, fr.denominator


def realize_weights(w1, w2, class_constant):
    """Cone data (p, q) for a weight pair inside a fixed normalized class.

    The transverse geometry depends on the weights only through their
    ratio r = w1/w2; within the class 1/p + 1/q = class_constant the pair
    (p, q) = (r s, s) with s = (1 + 1/r)/class_constant is determined.
    """
    a, b = _reduce_ratio(w1, w2)
    r = a / b
    s = (1.0 + 1.0 / r) / class_constant
    return r * s, s


def reeb_family_experiment(base, members, t_end=5.0, N=96,
                           checkpoint_dt=0.5):
    """Flow stability across a family of quasi-regular Reeb deformations.

    base and members are weight pairs with rational ratios; each member is
    realized as the football with its weight ratio inside the base's
    normalized class and flowed to t_end.  Reports, per member, the initial
    profile distance to the base, the sup-over-time flow distance, and
    their ratio (the discrete stability constant).
    """
    p0, q0 = float(base[0]), float(base[1])
    m = 1.0 / p0 + 1.0 / q0

    def run_member(p, q):
        state = FlowState(ProfileGeometry.football(p, q, N))
        traj = run(state, t_end, checkpoint_dt=checkpoint_dt)
        return [snap["psi"] for snap in traj.snapshots]

    base_series = run_member(*realize_weights(p0, q0, m))
    table = []
    for w1, w2 in members:
        p, q = realize_weights(w1, w2, m)
        series = run_member(p, q)
        d0 = float(np.max(np.abs(series[0] - base_series[0])))
        sup_dev = max(float(np.max(np.abs(s - b)))
                      for s, b in zip(series, base_series))
        bound = sup_dev / d0 if d0 > 0.0 else 0.0
        table.append({
            "weights": (w1, w2),
            "ratio": _reduce_ratio(w1, w2)[0] / _reduce_ratio(w1, w2)[1],
            "initial_distance": d0,
            "sup_deviation": sup_dev,
            "stability_ratio": bound,
        })
    return table


def require_class(geom):
    """Guard: the profile must sit in the normalized flow class."""
    m = 1.0 / geom.p + 1.0 / geom.q
    if abs(geom.mu_max - m) > 1e-10 * max(1.0, m):
        raise IncompatibleClass(
            "mu_max %.6g not equal to 1/p + 1/q = %.6g" % (geom.mu_max, m))
    return geom
