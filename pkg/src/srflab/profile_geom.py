"""Axisymmetric leaf-space geometry in the momentum (area) coordinate.

A cohomogeneity-one transverse metric on a sphere-type leaf space is stored
as a single profile ``psi(mu)`` with

    ds^2 = dmu^2 / psi + psi dtheta^2,   mu in [0, mu_max],

on the cell-centered grid ``mu_j = (j + 1/2) h``.  In this coordinate the
area element is ``dmu dtheta`` exactly, so the total transverse area
``2 pi mu_max`` is conserved identically by any evolution of ``psi``.  Cone
points of angle ``2 pi / p`` and ``2 pi / q`` at the two poles correspond to
the boundary data

    psi(0) = 0,  psi'(0) = 2/p,   psi(mu_max) = 0,  psi'(mu_max) = -2/q.

Curvature: Gauss curvature K = -psi''/2, transverse scalar R^T = 2K = -psi''.
The analytic (complex-Hessian) normalization has R_hat = K, lap_hat f =
(psi f')'/2, |grad f|^2_hat = psi f'^2 / 2; the Riemannian operators are
twice these.  The holomorphic Hessian of an axisymmetric f has squared norm
(psi f''/2)^2 in the analytic normalization.
"""

import numpy as np
from scipy.optimize import brentq

from .errors import IncompatibleClass, NonPositiveMetric

TWO_PI = 2.0 * np.pi
GENERIC_FIBER = 8.0 * np.pi  # fiber length in the normalized flow class


class ProfileGeometry:
    """A sampled axisymmetric transverse metric with cone data."""

    def __init__(self, psi, p, q, mu_max, l=GENERIC_FIBER):
        psi = np.asarray(psi, dtype=float)
        if psi.ndim != 1 or psi.shape[0] < 8:
            raise NonPositiveMetric("profile needs at least 8 cells")
        if np.any(psi <= 0.0) or not np.all(np.isfinite(psi)):
            j = int(np.argmin(psi))
            raise NonPositiveMetric("profile not positive",
                                    point=j, eigenvalue=float(psi[j]))
        self.psi = psi
        self.p = float(p)
        self.q = float(q)
        self.mu_max = float(mu_max)
        self.l = float(l)
        self.N = psi.shape[0]
        self.h = self.mu_max / self.N
        self.mu = (np.arange(self.N) + 0.5) * self.h

    # -- construction -----------------------------------------------------

    @classmethod
    def round_fixed_point(cls, N):
        """Round transverse-Einstein profile (K = 1, the flow fixed point)."""
        h = 2.0 / N
        mu = (np.arange(N) + 0.5) * h
        return cls(mu * (2.0 - mu), 1.0, 1.0, 2.0)

    @classmethod
    def unit_hopf(cls, N):
        """Quotient of the unit round 3-sphere: K = 4, radius-1/2 sphere."""
        h = 0.5 / N
        mu = (np.arange(N) + 0.5) * h
        return cls(2.0 * mu * (1.0 - 2.0 * mu), 1.0, 1.0, 0.5, l=TWO_PI)

    @classmethod
    def football(cls, p, q, N):
        """Concave initial football/teardrop profile with cone data (p, q).

        Cubic Hermite interpolant of the boundary data plus a quartic bump
        c mu^2 (m - mu)^2, with c chosen deterministically so the profile is
        positive and uniformly concave (psi'' <= -0.05, i.e. K >= 0.025).
        """
        p = float(p)
        q = float(q)
        m = 1.0 / p + 1.0 / q
        h = m / N
        mu = (np.arange(N) + 0.5) * h
        a = 2.0 / (p * m)
        b = (2.0 / (q * m) - a) / m
        fine = np.linspace(0.0, m, 4097)

        def build(c, x):
            return x * (m - x) * (a + b * x) + c * x * x * (m - x) ** 2

        def build_dd(c, x):
            return (2.0 * (b * m - a) - 6.0 * b * x
                    + c * (2.0 * m * m - 12.0 * m * x + 12.0 * x * x))

        best = None
        for mag in np.arange(0.0, 2.0001, 0.025):
            for c in ((mag,) if mag == 0.0 else (-mag, mag)):
                vals = build(c, fine[1:-1])
                if np.min(vals) <= 0.0:
                    continue
                if np.max(build_dd(c, fine)) <= -0.05:
                    best = c
                    break
            if best is not None:
                break
        if best is None:
            raise NonPositiveMetric(
                "no concave positive football profile for (%g, %g)" % (p, q))
        return cls(build(best, mu), p, q, m)

    @classmethod
    def soliton(cls, p, q, N):
        """Closed-form gradient-soliton profile for cone data (p, q)."""
        p = float(p)
        q = float(q)
        m = 1.0 / p + 1.0 / q
        c = soliton_parameter(p, q)
        h = m / N
        mu = (np.arange(N) + 0.5) * h
        return cls(soliton_profile(mu, p, q), p, q, m)

    def copy(self):
        return ProfileGeometry(self.psi.copy(), self.p, self.q,
                               self.mu_max, self.l)

    def with_psi(self, psi):
        return ProfileGeometry(psi, self.p, self.q, self.mu_max, self.l)

    # -- basic fields -----------------------------------------------------

    def _ghosts(self, arr, kind):
        """Extended array with one ghost cell at each pole."""
        e = np.empty(self.N + 2)
        e[1:-1] = arr
        if kind == "psi":
            e[0] = arr[0] - 2.0 * self.h / self.p
            e[-1] = arr[-1] - 2.0 * self.h / self.q
        else:  # quadratic extrapolation
            e[0] = 3 * arr[0] - 3 * arr[1] + arr[2]
            e[-1] = 3 * arr[-1] - 3 * arr[-2] + arr[-3]
        return e

    def psi_mu(self):
        e = self._ghosts(self.psi, "psi")
        return (e[2:] - e[:-2]) / (2.0 * self.h)

    def psi_mumu(self):
        e = self._ghosts(self.psi, "psi")
        return (e[2:] - 2.0 * self.psi + e[:-2]) / self.h ** 2

    def gauss_K(self):
        return -0.5 * self.psi_mumu()

    def R_transverse(self):
        """Riemannian transverse scalar curvature R^T = 2K."""
        return -self.psi_mumu()

    def R_hat(self):
        """Analytic scalar (complex trace of the Ricci form) = K."""
        return self.gauss_K()

    def advection_V(self):
        return self.mu + 0.5 * self.psi_mu() - 1.0 / self.p

    # -- differential operators on axisymmetric scalars -------------------

    def d_mu(self, f):
        e = self._ghosts(np.asarray(f, float), "extrapolate")
        return (e[2:] - e[:-2]) / (2.0 * self.h)

    def grad2_adjoint(self, f, weight):
        """Exact discrete gradient density of sum_j psi_j (Df)_j^2 W_j with
        respect to f, where D is the ghost-extrapolated centered difference
        used by d_mu.  Returns D^T (2 psi (Df) W)."""
        m = 2.0 * self.psi * self.d_mu(f) * np.asarray(weight, float)
        s = np.zeros(self.N)
        inv2h = 0.5 / self.h
        s[2:] += m[1:-1] * inv2h
        s[:-2] -= m[1:-1] * inv2h
        # quadratic-extrapolation ghost rows at the two poles
        s[0] += -3.0 * m[0] * inv2h
        s[1] += 4.0 * m[0] * inv2h
        s[2] += -1.0 * m[0] * inv2h
        s[-1] += 3.0 * m[-1] * inv2h
        s[-2] += -4.0 * m[-1] * inv2h
        s[-3] += 1.0 * m[-1] * inv2h
        return s

    def lap_LB(self, f):
        """Riemannian Laplace-Beltrami (psi f')' in flux form.

        The flux vanishes identically at the pole faces (psi -> 0), so the
        discrete operator is exactly self-adjoint with zero total integral.
        """
        f = np.asarray(f, float)
        flux = np.zeros(self.N + 1)
        psi_face = 0.5 * (self.psi[:-1] + self.psi[1:])
        flux[1:-1] = psi_face * (f[1:] - f[:-1]) / self.h
        return (flux[1:] - flux[:-1]) / self.h

    def lap_hat(self, f):
        """Analytic Laplacian = half the Riemannian one."""
        return 0.5 * self.lap_LB(f)

    def grad2_R(self, f):
        """|grad f|^2 for the Riemannian surface metric: psi f'^2."""
        return self.psi * self.d_mu(f) ** 2

    def grad2_hat(self, f):
        return 0.5 * self.grad2_R(f)

    def holo_hess_hat(self, f):
        """Metric-normalized holomorphic Hessian (analytic): psi f''/2.

        Vanishes exactly on profiles/functions generating holomorphic
        vector fields (f linear in mu on the round profile).
        """
        f = np.asarray(f, float)
        e = self._ghosts(f, "extrapolate")
        f_mm = (e[2:] - 2.0 * f + e[:-2]) / self.h ** 2
        return 0.5 * self.psi * f_mm

    # -- quadrature -------------------------------------------------------

    @property
    def area(self):
        return TWO_PI * self.mu_max

    @property
    def volume(self):
        """Total volume of the total space: fiber length times leaf area."""
        return self.l * self.area

    def integrate_area(self, f):
        """Integral over the leaf surface (midpoint rule, O(h^2))."""
        return TWO_PI * self.h * float(np.sum(f))

    def integrate(self, f):
        """Integral over the total space (dV = l dA)."""
        return self.l * self.integrate_area(f)

    def cell_measure(self):
        """Per-cell volume weights: integrate(f) == sum(f * cell_measure())."""
        return np.full(self.N, self.l * TWO_PI * self.h)

    def u_mu_faces(self):
        """Ricci-potential slope u' = 2V/psi on the faces mu = 0, h, ...,
        mu_max, with the same face discretization as the flow kernels, so
        a flow stationary state has exactly constant slopes.  The pole
        faces are quadratic extrapolations (u' is regular there whenever
        the cone data closes the profile)."""
        N, h = self.N, self.h
        face_d = (self.psi[1:] - self.psi[:-1]) / h
        face_p = 0.5 * (self.psi[1:] + self.psi[:-1])
        s = np.empty(N + 1)
        s[1:-1] = (2.0 * np.arange(1.0, N) * h + face_d
                   - 2.0 / self.p) / face_p
        s[0] = 3.0 * s[1] - 3.0 * s[2] + s[3]
        s[-1] = 3.0 * s[-2] - 3.0 * s[-3] + s[-4]
        return s

    # -- potential solves -------------------------------------------------

    def solve_radial_poisson(self, rhs, tol=1e-8):
        """Solve lap_hat g = rhs for an axisymmetric g (up to a constant).

        Integrates the flux (psi g')/2 from the regular left pole; the
        solvability condition is that the accumulated flux vanishes at the
        right pole, otherwise the data is not in the normalized class.
        Returns g with g[0] = 0.
        """
        rhs = np.asarray(rhs, float)
        flux = 2.0 * self.h * np.cumsum(rhs)  # psi g' at faces 1..N
        end_residual = abs(flux[-1]) * self.h
        if end_residual > tol * max(1.0, float(np.max(np.abs(flux)))):
            raise IncompatibleClass(
                "radial solvability residual %.3e" % end_residual)
        psi_face = 0.5 * (self.psi[:-1] + self.psi[1:])
        g = np.zeros(self.N)
        g[1:] = np.cumsum(flux[:-1] / psi_face) * self.h
        return g

    def ricci_potential(self):
        """Basic potential u with ddbar u = ghat - rho, int e^{-u} dV = 1.

        The trace equation lap_hat u = 1 - K integrates in closed form:
        psi u' = 2 mu + psi' - 2/p = 2 V, which is regular at both poles
        exactly when mu_max = 1/p + 1/q.  Returns (u, A) with
        A = -int u e^{-u} dV.
        """
        m = 1.0 / self.p + 1.0 / self.q
        if abs(self.mu_max - m) > 1e-10 * max(1.0, m):
            raise IncompatibleClass(
                "mu_max %.6g incompatible with cone data (needs %.6g); "
                "apply a D-homothety first" % (self.mu_max, m))
        h = self.h
        mu_face = np.arange(1, self.N) * h
        dpsi_face = (self.psi[1:] - self.psi[:-1]) / h
        psi_face = 0.5 * (self.psi[:-1] + self.psi[1:])
        u_mu_face = (2.0 * mu_face + dpsi_face - 2.0 / self.p) / psi_face
        u = np.zeros(self.N)
        u[1:] = np.cumsum(u_mu_face) * h
        # exact one-step normalization of the additive constant
        u += np.log(self.integrate(np.exp(-u)))
        A = -self.integrate(u * np.exp(-u))
        return u, A


def soliton_parameter(p, q, bracket=50.0):
    """Solve for the exponent c of the closed-form soliton profile.

    The profile psi = 2 mu / c + (B/c)(e^{c mu} - 1) with B = 2/p - 2/c
    satisfies the left cone data for every c; c is fixed by the right slope
    condition 2/c + B e^{c mu_max} = -2/q.  c = 0 (round) solves it iff
    p = q.
    """
    p = float(p)
    q = float(q)
    if p == q:
        return 0.0
    m = 1.0 / p + 1.0 / q

    # the closure condition psi(mu_max) = 0; given mu_max = 1/p + 1/q the
    # right slope condition is then automatic.  c = 0 is a spurious root
    # (it degenerates to the non-closing round quadratic), so the bracket
    # stays away from it.
    def f(c):
        B = 2.0 / p - 2.0 / c
        return 2.0 * m + B * np.expm1(c * m)

    sgn = -1.0 if q > p else 1.0
    a = sgn * 1e-3
    b = sgn * 0.5
    fa = f(a)
    while f(b) * fa > 0.0:
        b *= 2.0
        if abs(b) > bracket:
            raise IncompatibleClass("no soliton bracket for (%g,%g)" % (p, q))
    return brentq(f, min(a, b), max(a, b), xtol=1e-14, rtol=8.9e-16)


def soliton_profile(mu, p, q):
    """Closed-form soliton profile evaluated at points mu."""
    c = soliton_parameter(p, q)
    mu = np.asarray(mu, float)
    if c == 0.0:
        return (2.0 / p) * mu - mu * mu
    B = 2.0 / p - 2.0 / c
    return 2.0 * mu / c + (B / c) * np.expm1(c * mu)
