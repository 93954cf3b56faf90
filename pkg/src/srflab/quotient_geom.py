"""Quotient (leaf-space) geometry: distances, diameters, ball volumes.

The leaf space of the axisymmetric production path is a surface of
revolution in momentum coordinates: ds^2 = dmu^2/psi + psi dtheta^2 on
[0, mu_max] x S^1, with cone angles 2 pi / p and 2 pi / q at the poles.
Geodesics are computed from the Clairaut constant c = psi theta':

    (dmu/ds)^2 = psi - c^2,   dtheta/dmu = c / (psi sqrt(psi - c^2)),

with adaptive quadrature; turning points and pole passages are square-root
substitutions and through-cone-point candidates.  The momentum coordinate
makes pole-centered ball areas exact: Area{s(mu) < r} = 2 pi mu_r.
"""

import math
import warnings

import numpy as np
from scipy import integrate, interpolate, optimize

from .errors import NonPositiveParameter, ShootingNoConverge

TWO_PI = 2.0 * np.pi

_POLE_EPS = 1e-9
_QUAD_TOL = 1e-11


class QuotientModel:
    """Axisymmetric quotient: smooth psi profile plus fiber bookkeeping."""

    def __init__(self, kind, psi_fn, mu_max, p, q, l, dpsi_fn=None,
                 d2psi_fn=None):
        if not l > 0.0:
            raise NonPositiveParameter("fiber length must be positive")
        self.kind = kind
        self.mu_max = float(mu_max)
        self.p = float(p)
        self.q = float(q)
        self.l = float(l)
        self._psi = psi_fn
        self._dpsi = dpsi_fn
        self._d2psi = d2psi_fn
        self.cone_angles = (TWO_PI / self.p, TWO_PI / self.q)
        self.exceptional_fibers = []
        if self.p != 1.0:
            self.exceptional_fibers.append((0.0, self.l / self.p))
        if self.q != 1.0:
            self.exceptional_fibers.append((self.mu_max, self.l / self.q))
        # dense profile samples for argmax / min searches
        self._grid = np.linspace(0.0, self.mu_max, 2049)
        self._pg = np.maximum(self.psi(self._grid), 0.0)
        self._argmax = float(self._grid[int(np.argmax(self._pg))])
        self.psi_max = float(np.max(self._pg))

    # -- constructors ------------------------------------------------------

    @classmethod
    def round_sphere(cls, K=1.0, l=TWO_PI):
        """Round quotient of constant curvature K (sphere of radius
        1/sqrt(K)); mu_max = 2/K and psi = mu (2 - K mu)."""
        if not K > 0.0:
            raise NonPositiveParameter("curvature must be positive")
        mu_max = 2.0 / K
        return cls("regular_sphere",
                   lambda m: np.asarray(m) * (2.0 - K * np.asarray(m)),
                   mu_max, 1.0, 1.0, l,
                   dpsi_fn=lambda m: 2.0 - 2.0 * K * np.asarray(m),
                   d2psi_fn=lambda m: -2.0 * K * np.ones_like(
                       np.asarray(m, float)))

    @classmethod
    def from_profile(cls, geom, kind=None):
        """Cubic-spline leaf metric through the cell profile, with the exact
        pole values and cone slopes as boundary data."""
        nodes = np.concatenate(([0.0], geom.mu, [geom.mu_max]))
        vals = np.concatenate(([0.0], geom.psi, [0.0]))
        sp = interpolate.CubicSpline(nodes, vals,
                                     bc_type=((1, 2.0 / geom.p),
                                              (1, -2.0 / geom.q)))
        if kind is None:
            kind = ("regular_sphere" if geom.p == 1.0 and geom.q == 1.0
                    else "football")
        return cls(kind, sp, geom.mu_max, geom.p, geom.q, geom.l,
                   dpsi_fn=sp.derivative(1), d2psi_fn=sp.derivative(2))

    @classmethod
    def football(cls, p, q, N=256):
        from .profile_geom import ProfileGeometry
        return cls.from_profile(ProfileGeometry.football(float(p), float(q),
                                                         N), "football")

    # -- profile access ----------------------------------------------------

    def psi(self, mu):
        mu = np.clip(np.asarray(mu, float), 0.0, self.mu_max)
        return np.maximum(np.asarray(self._psi(mu), float), 0.0)

    def gauss_K(self, mu):
        mu = np.clip(np.asarray(mu, float), 0.0, self.mu_max)
        return -0.5 * np.asarray(self._d2psi(mu), float)

    def R_transverse(self, mu):
        return 2.0 * self.gauss_K(mu)

    @property
    def area(self):
        return TWO_PI * self.mu_max

    @property
    def volume(self):
        return self.l * self.area

    def gauss_bonnet_residual(self):
        """int K dA minus the orbifold Euler target 2 pi (1/p + 1/q)."""
        if hasattr(self._d2psi, "integrate"):
            # piecewise-polynomial profile: integrate exactly
            kint = -0.5 * float(self._d2psi.integrate(0.0, self.mu_max))
        else:
            kint = integrate.quad(lambda m: self.gauss_K(m), 0.0,
                                  self.mu_max, limit=200)[0]
        return float(TWO_PI * kint
                     - TWO_PI * (1.0 / self.p + 1.0 / self.q))


# ---------------------------------------------------------------------------
# arclength / azimuth quadratures
# ---------------------------------------------------------------------------
#
# Every Clairaut integral runs between (possibly coincident with) the two
# roots mu_-, mu_+ of psi - c^2.  In the angle variable
# mu = mid + half sin(phi) the quantity (psi - c^2)/cos^2(phi) extends
# smoothly through the turning points (simple roots), so fixed-order
# Gauss-Legendre panels converge rapidly; for the round profile the length
# integrand is exactly constant.

_GLX32, _GLW32 = np.polynomial.legendre.leggauss(32)
_GLX64, _GLW64 = np.polynomial.legendre.leggauss(64)


def _gl_adaptive(f, a, b, tol, depth=0):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    v32 = half * float(np.dot(_GLW32, f(mid + half * _GLX32)))
    v64 = half * float(np.dot(_GLW64, f(mid + half * _GLX64)))
    if not np.isfinite(v64):
        raise ShootingNoConverge("quadrature diverged: invalid leaf profile")
    if abs(v64 - v32) < tol or depth >= 12:
        return v64
    return (_gl_adaptive(f, a, mid, 0.5 * tol, depth + 1)
            + _gl_adaptive(f, mid, b, 0.5 * tol, depth + 1))


def _roots(model, c):
    """The two turning radii mu_-(c) < mu_+(c) where psi = c^2."""
    if c == 0.0:
        return 0.0, model.mu_max
    f = lambda m: float(model.psi(m)) - c * c
    lo = optimize.brentq(f, 1e-14, model._argmax, xtol=1e-15)
    hi = optimize.brentq(f, model._argmax, model.mu_max - 1e-14,
                         xtol=1e-15)
    return lo, hi


def _segment(model, c, roots, a, b, tol=_QUAD_TOL):
    """(length, azimuth) of a Clairaut arc with constant c on [a, b]."""
    if b - a <= 1e-15:
        return 0.0, 0.0
    mlo, mhi = roots
    mid = 0.5 * (mlo + mhi)
    half = 0.5 * (mhi - mlo)
    pa = math.asin(min(max((a - mid) / half, -1.0), 1.0))
    pb = math.asin(min(max((b - mid) / half, -1.0), 1.0))
    # slopes at the turning radii fix the 0/0 limit of W there
    dlo = max(float(model._dpsi(mlo)), 1e-300)
    dhi = max(-float(model._dpsi(mhi)), 1e-300)

    def W_of(s):
        with np.errstate(divide="ignore", invalid="ignore"):
            cp2 = np.maximum(1.0 - s * s, 1e-300)
            ps = np.maximum(model.psi(mid + half * s), 1e-300)
            W = (ps - c * c) / cp2
            W = np.where(1.0 - s > 1e-7, W, half * dhi / (1.0 + s))
            W = np.where(1.0 + s > 1e-7, W, half * dlo / (1.0 - s))
        return np.maximum(W, 1e-300), ps

    def length_f(phi):
        W, _ = W_of(np.sin(phi))
        return half / np.sqrt(W)

    L = _gl_adaptive(length_f, pa, pb, tol)
    if c == 0.0:
        return L, 0.0

    def angle_f(phi):
        W, ps = W_of(np.sin(phi))
        return half * c / (ps * np.sqrt(W))

    return L, _gl_adaptive(angle_f, pa, pb, tol)


def meridian_length(model, a, b):
    """Leaf arclength of the meridian between mu = a and mu = b."""
    a, b = min(a, b), max(a, b)
    return _segment(model, 0.0, (0.0, model.mu_max), a, b)[0]


def _arc_data(model, c, mu1, mu2, kind, tol=_QUAD_TOL, roots=None):
    """(length, azimuth) of the full candidate arc of the given kind."""
    if roots is None:
        roots = _roots(model, c)
    if kind == "mono":
        return _segment(model, c, roots, mu1, mu2, tol)
    if kind == "dip_low":
        l1, a1 = _segment(model, c, roots, roots[0], mu1, tol)
        l2, a2 = _segment(model, c, roots, mu1, mu2, tol)
        return 2.0 * l1 + l2, 2.0 * a1 + a2
    l1, a1 = _segment(model, c, roots, mu1, mu2, tol)
    l2, a2 = _segment(model, c, roots, mu2, roots[1], tol)
    return l1 + 2.0 * l2, a1 + 2.0 * a2


def _arc_candidates(model, mu1, mu2, targets, tol=_QUAD_TOL):
    """Lengths of every Clairaut arc (all three turning classes) subtending
    one of the azimuth ``targets`` between mu1 <= mu2 off the poles."""
    lo_psi = float(min(model.psi(mu1), model.psi(mu2)))
    c_hi = math.sqrt(max(lo_psi, 0.0)) * (1.0 - 1e-12)
    if c_hi <= 0.0:
        return []
    kinds = ["mono"]
    if mu1 > _POLE_EPS:
        kinds.append("dip_low")
    if mu2 < model.mu_max - _POLE_EPS:
        kinds.append("dip_high")
    # one deterministic c-net shared by every class and target; a loose
    # quadrature tolerance also selects the cheaper net
    n_net = 16 if tol < 1e-9 else 8
    xtol = 1e-13 if tol < 1e-9 else 1e-9
    cs = c_hi * np.sin(np.linspace(1e-3, 1.0, n_net) * 0.5 * np.pi) ** 2
    sweeps = {kind: [] for kind in kinds}
    for c in cs:
        c = float(c)
        try:
            roots = _roots(model, c)
        except ValueError:
            for kind in kinds:
                sweeps[kind].append((c, np.nan))
            continue
        for kind in kinds:
            try:
                a = _arc_data(model, c, mu1, mu2, kind, tol, roots)[1]
            except (ShootingNoConverge, ValueError):
                a = np.nan
            sweeps[kind].append((c, a))
    found = []
    for kind in kinds:
        def angle(c):
            return _arc_data(model, c, mu1, mu2, kind, tol)[1]
        sw = sweeps[kind]
        for target in targets:
            for (ca, aa), (cb, ab) in zip(sw[:-1], sw[1:]):
                if np.isnan(aa) or np.isnan(ab):
                    continue
                if (aa - target) * (ab - target) > 0.0:
                    continue
                try:
                    c_star = optimize.brentq(lambda x: angle(x) - target,
                                             ca, cb, xtol=xtol)
                    found.append(_arc_data(model, c_star, mu1, mu2, kind,
                                           tol)[0])
                except ValueError:
                    pass
    return found


def transverse_distance(model, x, y, tol=_QUAD_TOL):
    """Leaf-space geodesic distance between points given as (mu, theta)
    pairs (an optional fiber phase entry is ignored)."""
    mu1, th1 = float(x[0]), float(x[1])
    mu2, th2 = float(y[0]), float(y[1])
    for m in (mu1, mu2):
        if not 0.0 <= m <= model.mu_max + 1e-12:
            raise ShootingNoConverge("point outside the leaf interval")
    if mu2 < mu1:
        mu1, mu2 = mu2, mu1
    dth = abs(th2 - th1) % TWO_PI
    dth = min(dth, TWO_PI - dth)

    cands = [meridian_length(model, 0.0, mu1)
             + meridian_length(model, 0.0, mu2),
             meridian_length(model, mu1, model.mu_max)
             + meridian_length(model, mu2, model.mu_max)]
    pole1 = mu1 <= _POLE_EPS
    pole2 = mu2 >= model.mu_max - _POLE_EPS
    if dth < 1e-12:
        cands.append(meridian_length(model, mu1, mu2))
    elif not (pole1 and pole2):
        cands.extend(_arc_candidates(model, mu1, mu2,
                                     (dth, TWO_PI - dth), tol))
    return float(min(cands))


def transverse_diameter(model, tol=1e-4, net=8, max_net=64):
    """Diameter of the leaf space.

    Closed-form axisymmetric candidates (pole-to-pole meridian, half the
    longest azimuthal circle) are combined with a deterministic meridian
    net of antipodal pairs, doubled until the maximum is stable.
    """
    if net < 2:
        warnings.warn("diameter net has fewer than two seeds; returning 0")
        return 0.0
    pole_pole = meridian_length(model, 0.0, model.mu_max)
    best = max(pole_pole, math.pi * math.sqrt(model.psi_max))
    prev = -1.0
    n = net
    while n <= max_net:
        mus = np.linspace(0.0, model.mu_max, n + 2)[1:-1]
        cur = best
        for i, a in enumerate(mus):
            for b in mus[i:]:
                cur = max(cur, transverse_distance(model, (a, 0.0),
                                                   (b, math.pi),
                                                   tol=1e-7))
        if prev >= 0.0 and abs(cur - prev) < tol:
            return float(cur)
        prev = cur
        n *= 2
    return float(prev)


def ambient_distance_bound_check(model, samples):
    """For sampled point pairs with fiber phases, verify the estimate
    sqrt(d_T^2 + offset^2) <= d_T + l.  Returns (max_violation,
    worst_slack)."""
    if not model.l > 0.0:
        raise NonPositiveParameter("fiber length must be positive")
    worst_slack = np.inf
    violation = 0.0
    for x, y in samples:
        dT = transverse_distance(model, x, y)
        ph = abs(float(x[2]) - float(y[2])) % 1.0 if len(x) > 2 else 0.0
        off = model.l * min(ph, 1.0 - ph)
        est = math.hypot(dT, off)
        slack = dT + model.l - est
        worst_slack = min(worst_slack, slack)
        violation = max(violation, -slack)
    return violation, worst_slack


# ---------------------------------------------------------------------------
# ball volumes
# ---------------------------------------------------------------------------

def _pole_radius_profile(model, from_top=False):
    """Map r -> mu of the meridian sphere around a pole (monotone)."""
    if from_top:
        s = lambda m: meridian_length(model, m, model.mu_max)
    else:
        s = lambda m: meridian_length(model, 0.0, m)
    return s


def _pole_ball_area(model, r, from_top=False):
    s = _pole_radius_profile(model, from_top)
    total = s(model.mu_max) if not from_top else s(0.0)
    if r >= total:
        return model.area
    if from_top:
        mu_r = optimize.brentq(lambda m: s(m) - r, 0.0,
                               model.mu_max - 1e-14, xtol=1e-13)
        return TWO_PI * (model.mu_max - mu_r)
    mu_r = optimize.brentq(lambda m: s(m) - r, 1e-14, model.mu_max,
                           xtol=1e-13)
    return TWO_PI * mu_r


def _geodesic_rhs(model):
    def rhs(_, y):
        mu = min(max(y[0], 0.0), model.mu_max)
        ps = max(float(model.psi(mu)), 1e-300)
        dps = float(model._dpsi(mu))
        K = float(model.gauss_K(mu))
        mu_d, th_d = y[2], y[3]
        return [mu_d, th_d,
                0.5 * dps / ps * mu_d * mu_d - 0.5 * ps * dps * th_d * th_d,
                -dps / ps * mu_d * th_d,
                y[5], -K * y[4], y[4]]
    return rhs


def _interior_ball(model, mu0, r, ndirs=64):
    """Geodesic-polar area of a small ball around an interior point via the
    transverse Jacobi equation j'' = -K j along each ray.  Also returns the
    mu-range visited (for curvature hypotheses on the ball)."""
    rhs = _geodesic_rhs(model)
    ps0 = float(model.psi(mu0))
    area = 0.0
    mu_lo, mu_hi = mu0, mu0
    for k in range(ndirs):
        beta = TWO_PI * (k + 0.5) / ndirs
        y0 = [mu0, 0.0, math.sqrt(ps0) * math.cos(beta),
              math.sin(beta) / math.sqrt(ps0), 0.0, 1.0, 0.0]
        hit = lambda _, y: min(y[0] - 1e-6 * model.mu_max,
                               model.mu_max * (1.0 - 1e-6) - y[0])
        hit.terminal = True
        sol = integrate.solve_ivp(rhs, (0.0, r), y0, rtol=1e-10,
                                  atol=1e-12, events=hit, dense_output=False)
        if sol.t[-1] < r * (1.0 - 1e-9):
            raise ShootingNoConverge(
                "ball radius reaches a pole; use a pole-centered ball")
        area += TWO_PI / ndirs * sol.y[6, -1]
        mu_lo = min(mu_lo, float(np.min(sol.y[0])))
        mu_hi = max(mu_hi, float(np.max(sol.y[0])))
    return area, (mu_lo, mu_hi)


def transverse_ball_volume(model, center, r, ndirs=64):
    """Volume of the tube over the leaf ball of radius r: l times the leaf
    area.  Pole-centered balls are exact in momentum coordinates
    (area = 2 pi mu_r); interior centers use geodesic polar coordinates."""
    if not r > 0.0:
        raise NonPositiveParameter("ball radius must be positive")
    mu0 = float(center[0]) if np.ndim(center) else float(center)
    # the pole-to-pole meridian length bounds every eccentricity (route
    # any point through the nearer pole), so such a radius covers M
    if r >= meridian_length(model, 0.0, model.mu_max):
        return model.volume
    if mu0 <= _POLE_EPS:
        return model.l * _pole_ball_area(model, r)
    if mu0 >= model.mu_max - _POLE_EPS:
        return model.l * _pole_ball_area(model, r, from_top=True)
    area, _ = _interior_ball(model, mu0, r, ndirs)
    return model.l * area


def volume_ratio_table(model, radii, center=0.0):
    """Rows (r, V(r), V(r/2), ratio); the small-r limit of the ratio is
    2^{2n} = 4 even at cone points (the leading area coefficient scales by
    the cone factor at both radii)."""
    rows = []
    for r in radii:
        v1 = transverse_ball_volume(model, center, r)
        v2 = transverse_ball_volume(model, center, 0.5 * r)
        rows.append({"r": float(r), "V": v1, "V_half": v2,
                     "ratio": v1 / v2})
    return rows


# ---------------------------------------------------------------------------
# flow-time diagnostics
# ---------------------------------------------------------------------------

def non_collapsing_audit(trajectory, C, r0):
    """kappa = Vol(B(x, r)) / r^2 over a deterministic (center, radius)
    grid, for balls satisfying the curvature hypothesis
    max R^T <= C r^{-2}; balls violating it are excluded and reported.
    Monitors that kappa does not degrade along the flow."""
    radii = [r0, 0.5 * r0, 0.25 * r0]
    rows = []
    for k, t in enumerate(trajectory.times):
        model = QuotientModel.from_profile(trajectory.geometry_at(k))
        kappas = []
        excluded = []
        centers = [0.0, model.mu_max, 0.5 * model.mu_max]
        for mu0 in centers:
            for r in radii:
                try:
                    if mu0 <= _POLE_EPS or mu0 >= model.mu_max - _POLE_EPS:
                        vol = transverse_ball_volume(model, mu0, r)
                        top = mu0 > _POLE_EPS
                        s = _pole_radius_profile(model, from_top=top)
                        lim = (optimize.brentq(
                            lambda m: s(m) - r, 1e-14,
                            model.mu_max - 1e-14, xtol=1e-12)
                            if r < meridian_length(model, 0.0,
                                                   model.mu_max)
                            else (0.0 if top else model.mu_max))
                        rng = ((lim, model.mu_max) if top else (0.0, lim))
                    else:
                        area, rng = _interior_ball(model, mu0, r, ndirs=32)
                        vol = model.l * area
                except ShootingNoConverge:
                    excluded.append({"center": mu0, "r": r,
                                     "reason": "ball reaches a pole"})
                    continue
                ms = np.linspace(rng[0], rng[1], 257)
                rt_max = float(np.max(model.R_transverse(ms)))
                if rt_max > C / (r * r):
                    excluded.append({"center": mu0, "r": r,
                                     "reason": "curvature hypothesis"})
                    continue
                kappas.append(vol / (r * r))
        rows.append({"t": t,
                     "kappa_min": min(kappas) if kappas else np.nan,
                     "audited": len(kappas), "excluded": excluded})
    kmin = np.array([r["kappa_min"] for r in rows])
    degr = (float(kmin[0] - np.nanmin(kmin))
            if np.any(np.isfinite(kmin)) else float("nan"))
    return {"checkpoints": rows,
            "kappa_series": kmin,
            "kappa_degradation": degr}


def annulus_diagnostics(trajectory, base_point=None, width=1.0, ntheta=32):
    """Per-checkpoint annulus report around the minimum of the potential.

    For each annulus {k width <= d^T < (k+1) width}: volume, the curvature
    integral int R^T dV, and the divergence identity
    int (R^T - 2) dV = -int lap u dV (boundary flux of psi u'), whose
    residual vanishes exactly at the fixed point.
    """
    out = []
    for k, t in enumerate(trajectory.times):
        geom = trajectory.geometry_at(k)
        model = QuotientModel.from_profile(geom)
        u = trajectory.snapshots[k]["u"]
        if base_point is None:
            mu_b = float(geom.mu[int(np.argmin(u))])
        else:
            mu_b = float(base_point)
        # distance from the base point to every grid cell, cached over the
        # axisymmetric (mu, dtheta) dependence
        if mu_b <= geom.mu[0] + geom.h:
            dist = np.array([meridian_length(model, 0.0, m)
                             for m in geom.mu])[:, None] * np.ones(
                                 (1, ntheta))
        else:
            dths = np.pi * (np.arange(ntheta // 2 + 1)) / (ntheta // 2)
            half = np.empty((geom.N, dths.size))
            for i, m in enumerate(geom.mu):
                for j, dth in enumerate(dths):
                    half[i, j] = transverse_distance(model, (mu_b, 0.0),
                                                     (m, dth), tol=1e-7)
            idx = np.minimum(np.arange(ntheta), ntheta - np.arange(ntheta))
            dist = half[:, idx]
        cellw = geom.l * geom.h * (TWO_PI / ntheta)
        rt = geom.R_transverse()[:, None]
        lap_u = geom.lap_LB(u)[:, None]
        kmax = int(math.ceil(float(np.max(dist)) / width))
        annuli = []
        for j in range(kmax):
            mask = (dist >= j * width) & (dist < (j + 1) * width)
            vol = cellw * float(np.sum(mask))
            if vol == 0.0:
                continue
            int_rt = cellw * float(np.sum(rt * mask))
            flux = -cellw * float(np.sum(lap_u * mask))
            annuli.append({
                "k": j, "volume": vol, "int_RT": int_rt,
                "identity_residual": abs(int_rt - 2.0 * vol - flux),
                "curvature_constant": int_rt / vol,
            })
        out.append({"t": t, "base_mu": mu_b, "annuli": annuli})
    return out


def quotient_report(model, radii=None, diameter_tol=1e-4):
    """JSON-ready summary of a quotient model."""
    diam = transverse_diameter(model, tol=diameter_tol)
    if radii is None:
        radii = [diam / 50.0, diam / 100.0]
    return {
        "kind": model.kind,
        "l": model.l,
        "cone_angles": list(model.cone_angles),
        "diameter": diam,
        "gauss_bonnet_residual": model.gauss_bonnet_residual(),
        "ratio_table": volume_ratio_table(model, radii),
    }
