"""Hot numerical kernels for the axisymmetric production path.

Two interchangeable backends compute identical results:

* a numba ``@njit`` loop backend (default when numba is importable), and
* a vectorized pure-numpy fallback.

Set ``ARTIFACT_NO_NUMBA=1`` to force the numpy backend.  Kernels are serial
(no threading) so repeated runs are bitwise deterministic.

The evolved profile lives on a cell-centered grid ``mu_j = (j + 1/2) h`` over
``[0, mu_max]``; the metric is ``ds^2 = dmu^2/psi + psi dtheta^2``.  The
profile evolution closes the stencils with value-anchored pole ghosts
(cubic through ``psi(pole) = 0`` and the three adjacent cells); the
linear transport kernels read the cone slopes ``2/p, -2/q`` directly.
"""

import math
import os

import numpy as np

_FORCED_OFF = os.environ.get("ARTIFACT_NO_NUMBA", "") == "1"
try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - environment dependent
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _FORCED_OFF
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# loop-style implementations (numba-compiled when available)
# ---------------------------------------------------------------------------

def _interp_nodes_impl(x, fp, h, mu_max):
    """Linear interpolation on nodes [0, h/2, 3h/2, ..., mu_max-h/2, mu_max].

    ``fp`` has length N + 2 with pole anchors at both ends.
    """
    n_nodes = fp.shape[0]
    N = n_nodes - 2
    if x <= 0.0:
        return fp[0]
    if x >= mu_max:
        return fp[n_nodes - 1]
    half = 0.5 * h
    if x <= half:
        return fp[0] + (fp[1] - fp[0]) * (x / half)
    if x >= mu_max - half:
        return fp[N] + (fp[N + 1] - fp[N]) * ((x - (mu_max - half)) / half)
    t = x / h + 0.5
    i0 = int(t)
    frac = t - i0
    return fp[i0] + frac * (fp[i0 + 1] - fp[i0])


def _profile_rhs_impl(psi, m0, phi, mu, h, p, q, psi0n, F0n,
                      dpsi, dm0, dphi):
    """Profile evolution in potential-slope flux form.

    The profile equation psi_t = psi + psi psi''/2 - V psi' is identically
    psi_t = (psi^2 / 2) (psi u')' / psi = (psi^2 / 2) u'' with the Ricci
    potential slope psi u' = 2 mu + psi' - 2/p.  Differencing u' on the
    faces makes every profile with constant discrete u' (the soliton
    family) an exact stationary state of the interior scheme; the two pole
    cells use the classical form closed with value-anchored ghosts (cubic
    through psi(pole) = 0 and the three adjacent cells), which selects the
    member with the correct pole behaviour and keeps the pole cells
    parabolically damped.
    A slope-only ghost closure has a spurious growing mode at a pole where
    K < 1.
    """
    N = psi.shape[0]
    inv2h = 1.0 / (2.0 * h)
    invh2 = 1.0 / (h * h)
    mu_max = mu[N - 1] + 0.5 * h
    s = np.empty(N + 1)
    for f in range(1, N):
        face_d = (psi[f] - psi[f - 1]) / h
        face_p = 0.5 * (psi[f] + psi[f - 1])
        s[f] = (2.0 * f * h + face_d - 2.0 / p) / face_p
    s[0] = 3.0 * s[1] - 3.0 * s[2] + s[3]
    s[N] = 3.0 * s[N - 1] - 3.0 * s[N - 2] + s[N - 3]
    gl = -3.0 * psi[0] + psi[1] - 0.2 * psi[2]
    gr = -3.0 * psi[N - 1] + psi[N - 2] - 0.2 * psi[N - 3]
    m0l = 3.0 * m0[0] - 3.0 * m0[1] + m0[2]
    m0r = 3.0 * m0[N - 1] - 3.0 * m0[N - 2] + m0[N - 3]
    phl = 3.0 * phi[0] - 3.0 * phi[1] + phi[2]
    phr = 3.0 * phi[N - 1] - 3.0 * phi[N - 2] + phi[N - 3]
    for j in range(N):
        if j == 0 or j == N - 1:
            pm1 = gl if j == 0 else psi[j - 1]
            pp1 = psi[1] if j == 0 else gr
            psi_mu = (pp1 - pm1) * inv2h
            psi_mm = (pp1 - 2.0 * psi[j] + pm1) * invh2
            V = mu[j] + 0.5 * psi_mu - 1.0 / p
            dpsi[j] = psi[j] + 0.5 * psi[j] * psi_mm - V * psi_mu
        else:
            dpsi[j] = 0.5 * psi[j] * psi[j] * (s[j + 1] - s[j]) / h
            V = 0.25 * psi[j] * (s[j] + s[j + 1])
        mm1 = m0l if j == 0 else m0[j - 1]
        mp1 = m0r if j == N - 1 else m0[j + 1]
        dm0[j] = -V * (mp1 - mm1) * inv2h
        fm1 = phl if j == 0 else phi[j - 1]
        fp1 = phr if j == N - 1 else phi[j + 1]
        psi0x = _interp_nodes(m0[j], psi0n, h, mu_max)
        F0x = _interp_nodes(m0[j], F0n, h, mu_max)
        if psi[j] > 0.0 and psi0x > 0.0:
            dphi[j] = (math.log(psi[j] / psi0x) + phi[j] - F0x
                       - V * (fp1 - fm1) * inv2h)
        else:  # mid-stage degeneracy: the positivity check after the full
            dphi[j] = 0.0  # step reports it; avoid domain errors here


def _step_block_impl(psi, m0, phi, mu, h, p, q, psi0n, F0n, dt, nsteps):
    """Advance (psi, m0, phi) by nsteps explicit RK4 steps in place.

    Returns 0 on success, or 1-based index of the first step at which the
    profile lost positivity / finiteness.
    """
    N = psi.shape[0]
    k1a = np.empty(N); k1b = np.empty(N); k1c = np.empty(N)
    k2a = np.empty(N); k2b = np.empty(N); k2c = np.empty(N)
    k3a = np.empty(N); k3b = np.empty(N); k3c = np.empty(N)
    k4a = np.empty(N); k4b = np.empty(N); k4c = np.empty(N)
    ya = np.empty(N); yb = np.empty(N); yc = np.empty(N)
    for step in range(nsteps):
        _profile_rhs(psi, m0, phi, mu, h, p, q, psi0n, F0n, k1a, k1b, k1c)
        for j in range(N):
            ya[j] = psi[j] + 0.5 * dt * k1a[j]
            yb[j] = m0[j] + 0.5 * dt * k1b[j]
            yc[j] = phi[j] + 0.5 * dt * k1c[j]
        _profile_rhs(ya, yb, yc, mu, h, p, q, psi0n, F0n, k2a, k2b, k2c)
        for j in range(N):
            ya[j] = psi[j] + 0.5 * dt * k2a[j]
            yb[j] = m0[j] + 0.5 * dt * k2b[j]
            yc[j] = phi[j] + 0.5 * dt * k2c[j]
        _profile_rhs(ya, yb, yc, mu, h, p, q, psi0n, F0n, k3a, k3b, k3c)
        for j in range(N):
            ya[j] = psi[j] + dt * k3a[j]
            yb[j] = m0[j] + dt * k3b[j]
            yc[j] = phi[j] + dt * k3c[j]
        _profile_rhs(ya, yb, yc, mu, h, p, q, psi0n, F0n, k4a, k4b, k4c)
        c = dt / 6.0
        ok = True
        for j in range(N):
            psi[j] += c * (k1a[j] + 2.0 * k2a[j] + 2.0 * k3a[j] + k4a[j])
            m0[j] += c * (k1b[j] + 2.0 * k2b[j] + 2.0 * k3b[j] + k4b[j])
            phi[j] += c * (k1c[j] + 2.0 * k2c[j] + 2.0 * k3c[j] + k4c[j])
            if not (psi[j] > 0.0 and math.isfinite(psi[j])):
                ok = False
        if not ok:
            return step + 1
    return 0


def _heat_rhs_impl(w, psi, mu, h, p, q, alpha, adv, coef, dw):
    """dw = alpha (psi w')' + adv * V w' + coef_j w, flux-form Laplacian.

    ``coef`` holds the pointwise zeroth-order coefficient including
    curvature; ``adv`` is the signed advection coefficient multiplying
    V = mu + psi'/2 - 1/p (scalar transport of the momentum frame).
    """
    N = w.shape[0]
    invh = 1.0 / h
    inv2h = 0.5 / h
    gl = psi[0] - 2.0 * h / p
    gr = psi[N - 1] - 2.0 * h / q
    wl = 3.0 * w[0] - 3.0 * w[1] + w[2]
    wr = 3.0 * w[N - 1] - 3.0 * w[N - 2] + w[N - 3]
    flux_prev = 0.0  # psi vanishes at the pole face: exact zero flux
    for j in range(N):
        if j < N - 1:
            psi_face = 0.5 * (psi[j] + psi[j + 1])
            flux_next = psi_face * (w[j + 1] - w[j]) * invh
        else:
            flux_next = 0.0
        dw[j] = alpha * (flux_next - flux_prev) * invh + coef[j] * w[j]
        if adv != 0.0:
            pm1 = gl if j == 0 else psi[j - 1]
            pp1 = gr if j == N - 1 else psi[j + 1]
            V = mu[j] + (pp1 - pm1) * inv2h * 0.5 - 1.0 / p
            wm1 = wl if j == 0 else w[j - 1]
            wp1 = wr if j == N - 1 else w[j + 1]
            dw[j] += adv * V * (wp1 - wm1) * inv2h
        flux_prev = flux_next


def _curv_coef_impl(psi, h, p, q, c0, cR, ct_over_tau, coef):
    """coef_j = c0 + cR * R^T_j + ct_over_tau, with R^T = -psi''."""
    N = psi.shape[0]
    invh2 = 1.0 / (h * h)
    gl = psi[0] - 2.0 * h / p
    gr = psi[N - 1] - 2.0 * h / q
    for j in range(N):
        pm1 = gl if j == 0 else psi[j - 1]
        pp1 = gr if j == N - 1 else psi[j + 1]
        RT = -(pp1 - 2.0 * psi[j] + pm1) * invh2
        coef[j] = c0 + cR * RT + ct_over_tau


def _heat_block_impl(w, psi_a, psi_b, mu, sa, sb, h, p, q, dt, nsteps,
                     alpha, adv, c0, cR, ct, tau0, T, s0, time_sign):
    """Advance a linear parabolic equation with RK4, metric linearly
    interpolated between checkpoint profiles psi_a (at sa) and psi_b (at sb).

    dw/ds = alpha * lap_flux(w) + adv * V w' + (c0 + cR R^T + ct / tau(t)) w,
    where t = T - s if time_sign < 0 (backward substitution) else t = s.
    tau(t) = (tau0 - 1) e^t + 1.  Returns 0, or step index on blow-up.
    """
    N = w.shape[0]
    psi_s = np.empty(N)
    coef = np.empty(N)
    k1 = np.empty(N); k2 = np.empty(N); k3 = np.empty(N); k4 = np.empty(N)
    y = np.empty(N)
    span = sb - sa
    for step in range(nsteps):
        s = s0 + step * dt
        for stage in range(4):
            if stage == 0:
                ss = s
                for j in range(N):
                    y[j] = w[j]
                ko = k1
            elif stage == 1:
                ss = s + 0.5 * dt
                for j in range(N):
                    y[j] = w[j] + 0.5 * dt * k1[j]
                ko = k2
            elif stage == 2:
                ss = s + 0.5 * dt
                for j in range(N):
                    y[j] = w[j] + 0.5 * dt * k2[j]
                ko = k3
            else:
                ss = s + dt
                for j in range(N):
                    y[j] = w[j] + dt * k3[j]
                ko = k4
            if span != 0.0:
                th = (ss - sa) / span
            else:
                th = 0.0
            if th < 0.0:
                th = 0.0
            if th > 1.0:
                th = 1.0
            for j in range(N):
                psi_s[j] = psi_a[j] + th * (psi_b[j] - psi_a[j])
            if time_sign < 0:
                t = T - ss
            else:
                t = ss
            if ct != 0.0:
                tau = (tau0 - 1.0) * math.exp(t) + 1.0
                ctt = ct / tau
            else:
                ctt = 0.0
            _curv_coef(psi_s, h, p, q, c0, cR, ctt, coef)
            _heat_rhs(y, psi_s, mu, h, p, q, alpha, adv, coef, ko)
        c = dt / 6.0
        ok = True
        for j in range(N):
            w[j] += c * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            if not math.isfinite(w[j]):
                ok = False
        if not ok:
            return step + 1
    return 0


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

if USE_NUMBA:
    _interp_nodes = _njit(cache=True)(_interp_nodes_impl)
    _profile_rhs = _njit(cache=True)(_profile_rhs_impl)
    step_block = _njit(cache=True)(_step_block_impl)
    _heat_rhs = _njit(cache=True)(_heat_rhs_impl)
    _curv_coef = _njit(cache=True)(_curv_coef_impl)
    heat_block = _njit(cache=True)(_heat_block_impl)
else:
    _interp_nodes = _interp_nodes_impl
    _profile_rhs = _profile_rhs_impl
    step_block = _step_block_impl
    _heat_rhs = _heat_rhs_impl
    _curv_coef = _curv_coef_impl
    heat_block = _heat_block_impl


# numpy reference implementations, always available (used by the benchmark
# and to cross-check the compiled backend)

def interp_nodes_numpy(x, fp, h, mu_max):
    N = fp.shape[0] - 2
    xp = np.empty(N + 2)
    xp[0] = 0.0
    xp[1:N + 1] = (np.arange(N) + 0.5) * h
    xp[N + 1] = mu_max
    return np.interp(x, xp, fp)


def profile_rhs_numpy(psi, m0, phi, mu, h, p, q, psi0n, F0n):
    N = psi.shape[0]
    mu_max = mu[-1] + 0.5 * h

    def ext(a, gl, gr):
        e = np.empty(N + 2)
        e[1:-1] = a
        e[0] = gl
        e[-1] = gr
        return e

    # potential-slope flux form with value-anchored pole cells
    # (see _profile_rhs_impl)
    s = np.empty(N + 1)
    face_d = (psi[1:] - psi[:-1]) / h
    face_p = 0.5 * (psi[1:] + psi[:-1])
    s[1:-1] = (2.0 * np.arange(1.0, N) * h + face_d - 2.0 / p) / face_p
    s[0] = 3.0 * s[1] - 3.0 * s[2] + s[3]
    s[N] = 3.0 * s[N - 1] - 3.0 * s[N - 2] + s[N - 3]
    dpsi = 0.5 * psi * psi * (s[1:] - s[:-1]) / h
    V = 0.25 * psi * (s[:-1] + s[1:])
    for j, gl, gr_ in ((0, -3.0 * psi[0] + psi[1] - 0.2 * psi[2], psi[1]),
                       (N - 1, psi[N - 2],
                        -3.0 * psi[N - 1] + psi[N - 2] - 0.2 * psi[N - 3])):
        pm1 = gl
        pp1 = gr_
        psi_mu = (pp1 - pm1) / (2.0 * h)
        psi_mm = (pp1 - 2.0 * psi[j] + pm1) / (h * h)
        V[j] = mu[j] + 0.5 * psi_mu - 1.0 / p
        dpsi[j] = psi[j] + 0.5 * psi[j] * psi_mm - V[j] * psi_mu
    me = ext(m0, 3 * m0[0] - 3 * m0[1] + m0[2],
             3 * m0[-1] - 3 * m0[-2] + m0[-3])
    fe = ext(phi, 3 * phi[0] - 3 * phi[1] + phi[2],
             3 * phi[-1] - 3 * phi[-2] + phi[-3])
    dm0 = -V * (me[2:] - me[:-2]) / (2 * h)
    psi0x = interp_nodes_numpy(m0, psi0n, h, mu_max)
    F0x = interp_nodes_numpy(m0, F0n, h, mu_max)
    valid = (psi > 0.0) & (psi0x > 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        dphi = np.where(valid,
                        np.log(np.where(valid, psi / psi0x, 1.0)) + phi - F0x
                        - V * (fe[2:] - fe[:-2]) / (2 * h),
                        0.0)
    return dpsi, dm0, dphi


def step_block_numpy(psi, m0, phi, mu, h, p, q, psi0n, F0n, dt, nsteps):
    for step in range(nsteps):
        k1 = profile_rhs_numpy(psi, m0, phi, mu, h, p, q, psi0n, F0n)
        k2 = profile_rhs_numpy(psi + 0.5 * dt * k1[0], m0 + 0.5 * dt * k1[1],
                               phi + 0.5 * dt * k1[2], mu, h, p, q, psi0n, F0n)
        k3 = profile_rhs_numpy(psi + 0.5 * dt * k2[0], m0 + 0.5 * dt * k2[1],
                               phi + 0.5 * dt * k2[2], mu, h, p, q, psi0n, F0n)
        k4 = profile_rhs_numpy(psi + dt * k3[0], m0 + dt * k3[1],
                               phi + dt * k3[2], mu, h, p, q, psi0n, F0n)
        c = dt / 6.0
        psi += c * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        m0 += c * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        phi += c * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if not (np.all(psi > 0.0) and np.all(np.isfinite(psi))):
            return step + 1
    return 0


def warmup():
    """Trigger jit compilation of the hot kernels on tiny inputs."""
    N = 8
    h = 2.0 / N
    mu = (np.arange(N) + 0.5) * h
    psi = mu * (2.0 - mu)
    nodes = np.concatenate(([0.0], psi, [0.0]))
    F0 = np.zeros(N + 2)
    step_block(psi.copy(), mu.copy(), np.zeros(N), mu, h, 1.0, 1.0,
               nodes, F0, 1e-4, 2)
    heat_block(np.ones(N), psi, psi, mu, 0.0, 1.0, h, 1.0, 1.0, 1e-4, 2,
               1.0, 1.0, 0.0, -1.0, 1.0, 1.0, 1.0, 0.0, -1)
