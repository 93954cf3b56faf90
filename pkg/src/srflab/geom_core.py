"""Local charts for transverse Kahler geometry and curvature assembly.

A chart stores a real potential G on a rectangular grid in the transverse
complex coordinates (z_1, ..., z_n); real axes are ordered
(x_1, y_1, x_2, y_2, ...).  The transverse metric is g^T_{ij} = 2 d_i dbar_j G
and every curvature tensor is built from centered second-order differences of
G, stacked so that the discrete mixed partials commute exactly.  As a result
the Kahler symmetries of the curvature tensor hold to roundoff, while the
values themselves carry the usual O(h^2) truncation error.

Curvature normalization: riem_{ij kbar lbar} is twice the curvature of the
analytic metric ghat = g^T / 2, so that its trace against g_inv is the
(complex) transverse Ricci tensor with Ric^T = 2 rho, and real-frame scalars
come out as R^T = 2 Re(complex trace): unit Hopf data gives R^T = 8.

Ambient (2n+1)-dimensional curvature is assembled blockwise: horizontal
slots carry the transverse tensor plus the contact correction

    R = R^T - g(Phi Y, W) g(Phi X, Z) + g(Phi X, W) g(Phi Y, Z)
        - 2 g(Phi X, Y) g(Phi Z, W),

and Reeb slots carry the constant-curvature block
R1(A,B,C,D) = g(A,C)g(B,D) - g(A,D)g(B,C).  Tangent vectors use the adapted
real frame (xi, d/dx_i, d/dy_i) with components (eta(v), x_1..x_n, y_1..y_n).
"""

import numpy as np

from .errors import (GridTooCoarse, NonPositiveMetric, NonPositiveParameter,
                     SingularMetric, VectorNotInD)


# ---------------------------------------------------------------------------
# finite differences with per-axis boundary handling
# ---------------------------------------------------------------------------

def _ext(F, axis, periodic):
    """Extend F by one ghost layer on each side of the given axis."""
    if periodic:
        left = np.take(F, [-1], axis=axis)
        right = np.take(F, [0], axis=axis)
    else:  # quadratic extrapolation (second difference constant at the edge)
        f0 = np.take(F, [0], axis=axis)
        f1 = np.take(F, [1], axis=axis)
        f2 = np.take(F, [2], axis=axis)
        left = 3 * f0 - 3 * f1 + f2
        g0 = np.take(F, [-1], axis=axis)
        g1 = np.take(F, [-2], axis=axis)
        g2 = np.take(F, [-3], axis=axis)
        right = 3 * g0 - 3 * g1 + g2
    return np.concatenate((left, F, right), axis=axis)


def _d(F, axis, h, periodic):
    """Centered first difference along one real axis."""
    e = _ext(F, axis, periodic)
    n = F.shape[axis]
    lo = np.take(e, range(0, n), axis=axis)
    hi = np.take(e, range(2, n + 2), axis=axis)
    return (hi - lo) / (2.0 * h)


class LocalChart:
    """Sampled transverse Kahler potential on a rectangular grid.

    boundary is a dict with key "kind":
      * "periodic": all real axes periodic; "reference" holds the Hermitian
        matrix Q of the (non-periodic) quadratic reference potential
        sum Q_{ij} z_i zbar_j, and the stored samples are the full G.
      * "pole": non-periodic rectangular chart (pole-compactified or plain
        open window); optional "periodic_axes" marks angular axes, optional
        "cone" carries cone data (p, q).  Errors near open edges are O(h)
        from the extrapolated ghosts, so measurements use interior_window.
    """

    def __init__(self, n, G, spacing, origin, boundary):
        G = np.asarray(G, dtype=float)
        if G.ndim != 2 * n:
            raise GridTooCoarse("potential grid must have 2n axes")
        if min(G.shape) < 8:
            raise GridTooCoarse("need at least 8 points per axis")
        self.n = int(n)
        self.G = G
        hs = np.asarray(spacing, dtype=float)
        if hs.ndim == 0:
            hs = np.full(2 * n, float(hs))
        self.hs = hs
        self.h = float(hs[0])
        self.origin = np.asarray(origin, dtype=float)
        self.boundary = dict(boundary)
        kind = self.boundary.get("kind")
        if kind == "periodic":
            self.periodic = (True,) * (2 * n)
            Q = np.asarray(self.boundary.get("reference",
                                             np.zeros((n, n))), complex)
            self.reference = 0.5 * (Q + Q.conj().T)
            self.P = G - self._reference_samples()
        elif kind == "pole":
            self.periodic = tuple(ax in self.boundary.get("periodic_axes", ())
                                  for ax in range(2 * n))
            self.reference = None
            self.P = None
        else:
            raise GridTooCoarse("unknown boundary kind %r" % (kind,))

    # coordinates -----------------------------------------------------------

    def axis_points(self, axis):
        return self.origin[axis] + self.hs[axis] * np.arange(self.G.shape[axis])

    def axis_coords(self):
        """Complex coordinate arrays z_i broadcast over the grid."""
        grids = np.meshgrid(*[self.axis_points(a)
                              for a in range(2 * self.n)], indexing="ij")
        return [grids[2 * i] + 1j * grids[2 * i + 1] for i in range(self.n)]

    def _reference_samples(self):
        z = self.axis_coords()
        ref = np.zeros(self.G.shape)
        for i in range(self.n):
            for j in range(self.n):
                ref += np.real(self.reference[i, j] * z[i] * np.conj(z[j]))
        return ref

    def interior_window(self, margin=4):
        """Slices trimming open edges where ghost extrapolation degrades."""
        sl = []
        for ax in range(2 * self.n):
            if self.periodic[ax]:
                sl.append(slice(None))
            else:
                sl.append(slice(margin, self.G.shape[ax] - margin))
        return tuple(sl)

    # complex derivatives ---------------------------------------------------

    def dc(self, F, i, bar=False):
        """Holomorphic (or antiholomorphic) derivative along z_i."""
        dx = _d(F, 2 * i, self.hs[2 * i], self.periodic[2 * i])
        dy = _d(F, 2 * i + 1, self.hs[2 * i + 1], self.periodic[2 * i + 1])
        return 0.5 * (dx + 1j * dy) if bar else 0.5 * (dx - 1j * dy)

    def hessian_hat(self):
        """Analytic metric ghat_{ij} = d_i dbar_j G (Hermitian per point)."""
        n = self.n
        base = self.P if self.P is not None else self.G
        H = np.empty(self.G.shape + (n, n), dtype=complex)
        for i in range(n):
            di = self.dc(base, i)
            for j in range(n):
                H[..., i, j] = self.dc(di, j, bar=True)
        H = 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))
        if self.reference is not None:
            H = H + self.reference
        return H


def build_chart(potential_samples, n, boundary, spacing=None, origin=None):
    """Validate a sampled potential and wrap it as a LocalChart."""
    if np.iscomplexobj(potential_samples):
        raise NonPositiveMetric("potential must be real")
    G = np.asarray(potential_samples, dtype=float)
    if spacing is None:
        spacing = boundary.get("spacing", 1.0)
    if origin is None:
        origin = boundary.get("origin", np.zeros(2 * n))
    chart = LocalChart(n, G, spacing, origin, boundary)
    H = 2.0 * chart.hessian_hat()
    ev = np.linalg.eigvalsh(H[chart.interior_window()])
    lam_min = ev[..., 0]
    if np.min(lam_min) <= 0.0:
        flat = int(np.argmin(lam_min))
        idx = np.unravel_index(flat, lam_min.shape)
        raise NonPositiveMetric(
            "2 G_{ij} not positive definite at grid point %s" % (idx,),
            point=idx, eigenvalue=float(np.min(lam_min)))
    return chart


# ---------------------------------------------------------------------------
# metric and curvature fields
# ---------------------------------------------------------------------------

class TransverseMetricField:
    """g^T_{ij}, inverse, Christoffels and difference stacks per grid point."""

    def __init__(self, chart):
        n = chart.n
        self.source_chart = chart
        base = chart.P if chart.P is not None else chart.G
        # first complex derivatives of the periodic/open part, reused for
        # all higher stacks so mixed differences commute exactly
        D1 = [chart.dc(base, i) for i in range(n)]
        g = np.empty(chart.G.shape + (n, n), dtype=complex)
        T = np.empty(chart.G.shape + (n, n, n), dtype=complex)  # d_i g_{j l}
        H4 = np.empty(chart.G.shape + (n, n, n, n), dtype=complex)
        for i in range(n):
            for j in range(i, n):
                Dij = chart.dc(D1[i], j)  # d_i d_j G
                for l in range(n):
                    Tv = 2.0 * chart.dc(Dij, l, bar=True)
                    T[..., i, j, l] = Tv
                    T[..., j, i, l] = Tv
        for i in range(n):
            for l in range(n):
                Dil = chart.dc(D1[i], l, bar=True)
                g[..., i, l] = 2.0 * Dil
                for k in range(n):
                    Dilk = chart.dc(Dil, k)
                    for m in range(n):
                        H4[..., i, l, k, m] = 2.0 * chart.dc(Dilk, m, bar=True)
        g = 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))
        if chart.reference is not None:
            g = g + 2.0 * chart.reference
        self.g = g
        ev = np.linalg.eigvalsh(g)
        if np.min(ev[..., 0]) <= 0.0:
            raise NonPositiveMetric("metric lost positivity",
                                    eigenvalue=float(np.min(ev[..., 0])))
        cond = np.max(ev[..., -1] / ev[..., 0])
        if cond > 1e12:
            raise SingularMetric("condition number %.3e exceeds 1e12" % cond)
        self.g_inv = np.linalg.inv(g)
        # Gamma^k_{ij} = g^{kl} d_i g_{jl}; symmetric in (i, j) exactly
        self.christoffel = np.einsum("...kl,...ijl->...kij", self.g_inv, T)
        self._T = T       # d_i g_{j lbar}, symmetric in (i, j)
        self._H4 = H4     # d_i dbar_l d_k dbar_m applied to 2G


def metric_from_chart(chart):
    return TransverseMetricField(chart)


class CurvatureField:
    """riem R^T_{ij kbar lbar}, Ricci, scalar and Ricci form per point."""

    def __init__(self, riem, ricci, scalar, ricci_form, metric):
        self.riem = riem
        self.ricci = ricci
        self.scalar = scalar
        self.ricci_form = ricci_form
        self.metric = metric


def curvature(metric):
    """Transverse curvature tensors from the stored difference stacks.

    riem_{i jbar k lbar} = 2[ -d_k dbar_l ghat-hessian + contraction of the
    third-derivative stacks against g_inv ], with index placement chosen so
    that g_inv : riem (over the first pair) is the transverse Ricci tensor
    Ric^T = 2 rho and the real-frame scalar is 2 Re(trace).
    """
    T = metric._T
    H4 = metric._H4
    g_inv = metric.g_inv
    # second term: g^{p qbar} (d_k g_{i qbar}) (dbar_l g_{p jbar});
    # dbar_l g_{p jbar} = conj(d_l g_{j pbar})
    quad = np.einsum("...pq,...kiq,...ljp->...ijkl",
                     g_inv, T, np.conj(T))
    # first term: -d_k dbar_l g_{i jbar} = -H4[..., i, j, k, l]
    # (the discrete difference operators commute, so the stored index order
    # already realizes both members of each Kahler pair)
    riem = 2.0 * (-H4 + quad)
    ricci = np.einsum("...ij,...ijkl->...kl", g_inv, riem)
    scalar = 2.0 * np.real(np.einsum("...kl,...kl->...", g_inv, ricci))
    ricci_form = 0.5 * ricci
    return CurvatureField(riem, ricci, scalar, ricci_form, metric)


def ricci_form_independent(metric):
    """rho = -d dbar log det g^T, differenced directly (O(h^2) check)."""
    chart = metric.source_chart
    logdet = np.log(np.real(np.linalg.det(metric.g)))
    n = chart.n
    rho = np.empty(chart.G.shape + (n, n), dtype=complex)
    for i in range(n):
        di = chart.dc(logdet, i)
        for j in range(n):
            rho[..., i, j] = -chart.dc(di, j, bar=True)
    return rho


# ---------------------------------------------------------------------------
# adapted-frame linear algebra (vectors have components (eta, x_i, y_i))
# ---------------------------------------------------------------------------

def _split(v, n):
    v = np.asarray(v, dtype=float)
    if v.shape != (2 * n + 1,):
        raise VectorNotInD("expected %d components" % (2 * n + 1))
    return v[0], v[1:n + 1] + 1j * v[n + 1:]


def _require_in_D(v, n):
    eta, c = _split(v, n)
    if abs(eta) > 1e-10:
        raise VectorNotInD("Reeb component %.3e" % eta)
    return c


def gT_real(gpt, v, w):
    """Real transverse inner product from the Hermitian matrix g^T.

    Hermitian arrays pair the holomorphic component of the first vector
    with the conjugated component of the second: Re(v_i g_{ij} conj(w_j)).
    """
    n = gpt.shape[0]
    _, vc = _split(v, n)
    _, wc = _split(w, n)
    return float(np.real(vc @ gpt @ np.conj(wc)))


def g_full(gpt, v, w):
    """Full Sasakian metric g = g^T + eta (x) eta in the adapted frame."""
    return gT_real(gpt, v, w) + v[0] * w[0]


def phi_apply(v):
    """Contact endomorphism: complex structure on D, Phi(xi) = 0."""
    n = (len(v) - 1) // 2
    out = np.zeros_like(np.asarray(v, dtype=float))
    out[1:n + 1] = -np.asarray(v[n + 1:], dtype=float)
    out[n + 1:] = np.asarray(v[1:n + 1], dtype=float)
    return out


def reeb_vector(n):
    e = np.zeros(2 * n + 1)
    e[0] = 1.0
    return e


def transverse_R4(riem_pt, X, Y, Z, W):
    """Real transverse 4-tensor from the complex curvature components."""
    n = riem_pt.shape[0]
    xc = _require_in_D(X, n)
    yc = _require_in_D(Y, n)
    zc = _require_in_D(Z, n)
    wc = _require_in_D(W, n)
    a = np.outer(xc, np.conj(yc)) - np.outer(yc, np.conj(xc))
    b = np.outer(wc, np.conj(zc)) - np.outer(zc, np.conj(wc))
    return 0.25 * float(np.real(np.einsum("ijkl,ij,kl->", riem_pt, a, b)))


def full_curvature_from_transverse(curv_pt, gpt, X, Y, Z, W):
    """Ambient curvature R(X,Y,Z,W) for X,Y,Z,W in D.

    Convention: R(X,Y,X,Y) is the (unnormalized) sectional numerator, so the
    unit-Reeb models reproduce sec = 1 blocks.  curv_pt is the complex riem
    at the point, gpt the Hermitian transverse metric there.
    """
    base = transverse_R4(curv_pt, X, Y, Z, W)
    PX, PY = phi_apply(X), phi_apply(Y)
    corr = (-gT_real(gpt, PY, W) * gT_real(gpt, PX, Z)
            + gT_real(gpt, PX, W) * gT_real(gpt, PY, Z)
            - 2.0 * gT_real(gpt, PX, Y) * gT_real(gpt, phi_apply(Z), W))
    return base + corr


def _R1(gpt, A, B, C, D):
    return (g_full(gpt, A, C) * g_full(gpt, B, D)
            - g_full(gpt, A, D) * g_full(gpt, B, C))


def _horizontal(v):
    out = np.array(v, dtype=float)
    out[0] = 0.0
    return out


def ambient_curvature(curv_pt, gpt, A, B, C, D):
    """Blockwise ambient 4-tensor: transverse part on horizontal slots plus
    the constant-curvature Reeb block."""
    Ah, Bh, Ch, Dh = (_horizontal(v) for v in (A, B, C, D))
    horiz = full_curvature_from_transverse(curv_pt, gpt, Ah, Bh, Ch, Dh)
    return horiz + _R1(gpt, A, B, C, D) - _R1(gpt, Ah, Bh, Ch, Dh)


def reeb_curvature_check(curv_pt, gpt, X, Y):
    """Residual of R(X, xi)Y = g(xi, Y) X - g(X, Y) xi for the model tensor.

    The vector R(X, xi)Y is read off against an orthonormal frame via the
    assembled 4-tensor.
    """
    n = gpt.shape[0]
    xi = reeb_vector(n)
    frame = orthonormal_frame(gpt)
    resid = 0.0
    for E in frame:
        lhs = -ambient_curvature(curv_pt, gpt, X, xi, Y, E)
        rhs = (g_full(gpt, xi, Y) * g_full(gpt, X, E)
               - g_full(gpt, X, Y) * g_full(gpt, xi, E))
        resid += (lhs - rhs) ** 2
    return float(np.sqrt(resid))


def orthonormal_frame(gpt):
    """Gram-Schmidt orthonormal frame of the full metric, starting at xi."""
    n = gpt.shape[0]
    dim = 2 * n + 1
    vecs = [reeb_vector(n)]
    for a in range(1, dim):
        e = np.zeros(dim)
        e[a] = 1.0
        vecs.append(e)
    frame = []
    for v in vecs:
        w = np.array(v, dtype=float)
        for u in frame:
            w = w - g_full(gpt, u, w) * u
        nrm = np.sqrt(g_full(gpt, w, w))
        frame.append(w / nrm)
    return frame


def ambient_ricci(curv_pt, gpt, X, Y):
    frame = orthonormal_frame(gpt)
    return sum(ambient_curvature(curv_pt, gpt, X, E, Y, E) for E in frame)


def curvature_relations_check(curv_pt, gpt):
    """Max residuals of Ric^T = Ric + 2g on D and R^T = R + 2n at a point."""
    n = gpt.shape[0]
    frame = orthonormal_frame(gpt)
    horiz = frame[1:]
    # transverse Ricci as a real bilinear form: contract the real 4-tensor
    ricci_res = 0.0
    for X in horiz:
        for Y in horiz:
            ricT = sum(transverse_R4(curv_pt, X, E, Y, E) for E in horiz)
            amb = ambient_ricci(curv_pt, gpt, X, Y)
            ricci_res = max(ricci_res,
                            abs(ricT - (amb + 2.0 * gT_real(gpt, X, Y))))
    RT = 0.0
    for X in horiz:
        for E in horiz:
            RT += transverse_R4(curv_pt, X, E, X, E)
    R = sum(ambient_ricci(curv_pt, gpt, E, E) for E in frame)
    scalar_res = abs(RT - (R + 2.0 * n))
    return ricci_res, scalar_res


# ---------------------------------------------------------------------------
# Sasakian metric sample and D-homothety
# ---------------------------------------------------------------------------

class SasakianMetricSample:
    """Full (2n+1)-metric, contact form and Phi at one grid point."""

    def __init__(self, gpt):
        n = gpt.shape[0]
        dim = 2 * n + 1
        full = np.empty((dim, dim))
        for a in range(dim):
            ea = np.zeros(dim)
            ea[a] = 1.0
            for b in range(dim):
                eb = np.zeros(dim)
                eb[b] = 1.0
                full[a, b] = g_full(gpt, ea, eb)
        self.full_metric = full
        self.eta_component = np.zeros(dim)
        self.eta_component[0] = 1.0
        phi = np.zeros((dim, dim))
        for b in range(dim):
            eb = np.zeros(dim)
            eb[b] = 1.0
            phi[:, b] = phi_apply(eb)
        self.phi_tensor = phi

    def phi_square_residual(self):
        dim = self.phi_tensor.shape[0]
        target = -np.eye(dim)
        target[0, 0] = 0.0  # -I + eta (x) xi kills the Reeb direction
        return float(np.max(np.abs(self.phi_tensor @ self.phi_tensor
                                   - target)))


def d_homothetic(chart, a):
    """D-homothety: potential and reference scale by a, g~^T = a g^T."""
    if not a > 0:
        raise NonPositiveParameter("homothety parameter must be positive")
    boundary = dict(chart.boundary)
    if chart.reference is not None:
        boundary["reference"] = a * chart.reference
    return LocalChart(chart.n, a * chart.G, chart.hs, chart.origin, boundary)
