"""Basic differential forms on charts and the transverse Hodge operators.

Forms are stored by their coefficient arrays on the chart grid (basic: no
Reeb dependence).  Supported bidegrees are (p, q) with p, q <= 1 plus the
blocks (2,0) and (0,2) where n = 2 allows them; coefficient axes follow the
grid axes, holomorphic indices first.

All operators live in the analytic normalization: the metric is
ghat = g^T / 2, whose Kahler form is exactly half the contact 2-form,
omega = (1/2) d eta = i ghat_{ij} dz_i dz_bar_j.  The Lefschetz operator L
wedges with omega, Lambda is its pointwise adjoint, and the codifferentials
use the explicit index formulas

    delbar* psi = -ghat^{ij} nabla_i psi_{A, j Bbar'},
    del*    psi = -ghat^{ij} nabla_bar_j psi_{i A', Bbar},

contracting the leading index of each block.  The overall sign is anchored
by exact discrete adjointness on flat periodic charts (summation by parts),
which pins the convention the smooth theory leaves open in odd dimension.
With these choices the commutator identities close as

    [Lambda, del] = s i delbar*,   [Lambda, delbar] = s i del*,

with s = (-1)^(p+q+1) on a (p, q)-form: the coefficient storage keeps the
dz-before-dzbar ordering fixed instead of tracking transposition signs, and
the usual uniform commutator signs pick up one factor (-1) per form degree.
The identities hold exactly on flat charts and to O(h^2) on curved ones.
"""

import numpy as np

from .errors import DegreeOverflow, DegreeUnderflow, NonPeriodicChart
from .geom_core import build_chart, metric_from_chart


class BasicForm:
    """Coefficient array of a basic (p, q)-form on a chart."""

    def __init__(self, chart, p, q, coeff):
        self.chart = chart
        self.p = int(p)
        self.q = int(q)
        c = np.asarray(coeff, dtype=complex)
        n = chart.n
        expect = chart.G.shape + (n,) * (self.p + self.q)
        if c.shape != expect:
            raise DegreeOverflow("coefficient shape %s does not match "
                                 "bidegree (%d,%d)" % (c.shape, p, q))
        # enforce antisymmetry inside each same-type index block
        if self.p == 2 or self.q == 2:
            c = 0.5 * (c - np.swapaxes(c, -1, -2))
        self.c = c

    def max_norm(self):
        return float(np.max(np.abs(self.c)))


# ---------------------------------------------------------------------------
# covariant differentiation helpers
# ---------------------------------------------------------------------------

def _hat(metric):
    """Analytic metric and inverse (ghat = g / 2)."""
    return 0.5 * metric.g, 2.0 * metric.g_inv


def _dstack(chart, F, bar):
    """Stack of complex derivatives along every z_i: new trailing index."""
    return np.stack([chart.dc(F, i, bar=bar) for i in range(chart.n)],
                    axis=-1)


def _gamma_term(chart, gam, c, axis):
    """Christoffel correction sum_m gam[..., m, i, k] c[..., m, ...].

    The contracted tensor axis stays in place (renamed m -> k); the new
    derivative index i is appended last.  Works for any trailing axes.
    """
    ng = 2 * chart.n
    n = chart.n
    src = np.moveaxis(c, axis, ng)
    grid = src.shape[:ng]
    rest = src.shape[ng + 1:]
    src2 = src.reshape(grid + (n, -1))
    out2 = np.einsum("...mik,...mr->...kri", gam, src2)
    out = out2.reshape(grid + (n,) + rest + (n,))
    return np.moveaxis(out, ng, axis)


def _nabla_holo(chart, metric, c, p):
    """Covariant d_i with the new index appended last.

    Corrects the p leading tensor axes (the holomorphic block); on a Kahler
    structure d_i needs no correction on antiholomorphic indices.
    """
    out = _dstack(chart, c, bar=False)
    ng = 2 * chart.n
    for a in range(p):
        out = out - _gamma_term(chart, metric.christoffel, c, ng + a)
    return out


def _nabla_anti(chart, metric, c, p, q):
    """Covariant dbar_j with the new index appended last (corrects q axes)."""
    out = _dstack(chart, c, bar=True)
    ng = 2 * chart.n
    gam_bar = np.conj(metric.christoffel)
    for a in range(q):
        out = out - _gamma_term(chart, gam_bar, c, ng + p + a)
    return out


def _last_two(c, ax1, ax2):
    """Move axes ax1, ax2 of c to the last two slots, in that order."""
    rest = [a for a in range(c.ndim) if a not in (ax1, ax2)]
    return np.transpose(c, rest + [ax1, ax2])


def _contract_pair(gi, arr, ng):
    """Contract ghat^{ij} against the last two axes of arr.

    Free tensor axes of arr between the grid and the contracted pair are
    kept; gi is padded with singleton axes so the ellipses stay aligned.
    """
    nfree = arr.ndim - ng - 2
    gie = gi.reshape(gi.shape[:ng] + (1,) * nfree + gi.shape[ng:])
    return np.einsum("...ij,...ij->...", gie, arr)


# ---------------------------------------------------------------------------
# exterior derivatives
# ---------------------------------------------------------------------------

def del_B(form):
    chart = form.chart
    p, q = form.p, form.q
    if p + 1 > chart.n or p == 2:
        raise DegreeOverflow("cannot raise holomorphic degree past n")
    raw = _dstack(chart, form.c, bar=False)
    ng = 2 * chart.n
    new = np.moveaxis(raw, -1, ng)  # new holomorphic index leads its block
    if p == 1:
        new = new - np.swapaxes(new, ng, ng + 1)
    return BasicForm(chart, p + 1, q, new)


def delbar_B(form):
    chart = form.chart
    p, q = form.p, form.q
    if q + 1 > chart.n or q == 2:
        raise DegreeOverflow("cannot raise antiholomorphic degree past n")
    raw = _dstack(chart, form.c, bar=True)
    ng = 2 * chart.n
    new = np.moveaxis(raw, -1, ng + p)  # new anti index leads its block
    if q == 1:
        new = new - np.swapaxes(new, ng + p, ng + p + 1)
    return BasicForm(chart, p, q + 1, new)


# ---------------------------------------------------------------------------
# codifferentials
# ---------------------------------------------------------------------------

def delbar_star(form, metric):
    chart = form.chart
    p, q = form.p, form.q
    if q == 0:
        raise DegreeUnderflow("no antiholomorphic index to contract")
    _, gi = _hat(metric)
    cov = _nabla_holo(chart, metric, form.c, p)  # new holo index i last
    ng = 2 * chart.n
    # contract ghat^{ij} against nabla_i and the leading anti index j
    out = -_contract_pair(gi, _last_two(cov, cov.ndim - 1, ng + p), ng)
    return BasicForm(chart, p, q - 1, out)


def del_star(form, metric):
    chart = form.chart
    p, q = form.p, form.q
    if p == 0:
        raise DegreeUnderflow("no holomorphic index to contract")
    _, gi = _hat(metric)
    cov = _nabla_anti(chart, metric, form.c, p, q)  # new anti index j last
    ng = 2 * chart.n
    out = -_contract_pair(gi, _last_two(cov, ng, cov.ndim - 1), ng)
    return BasicForm(chart, p - 1, q, out)


# ---------------------------------------------------------------------------
# inner products and the Lefschetz pair
# ---------------------------------------------------------------------------

def _volume_weight(metric):
    """Real volume element det(g^T) per grid point, times the grid cell."""
    chart = metric.source_chart
    return np.real(np.linalg.det(metric.g)) * np.prod(chart.hs)


def inner(a, b, metric):
    """L2 pairing with ghat contractions and the real volume element."""
    if (a.p, a.q) != (b.p, b.q):
        raise DegreeOverflow("bidegree mismatch in pairing")
    _, gi = _hat(metric)
    x, y = a.c, np.conj(b.c)
    p, q = a.p, a.q
    if (p, q) == (0, 0):
        dens = x * y
    elif (p, q) == (1, 0):
        dens = np.einsum("...ik,...i,...k->...", gi, x, y)
    elif (p, q) == (0, 1):
        dens = np.einsum("...lj,...j,...l->...", gi, x, y)
    elif (p, q) == (1, 1):
        dens = np.einsum("...kp,...ml,...kl,...pm->...", gi, gi, x, y)
    elif (p, q) == (2, 0):
        dens = 0.5 * np.einsum("...ik,...jl,...ij,...kl->...", gi, gi, x, y)
    elif (p, q) == (0, 2):
        dens = 0.5 * np.einsum("...ki,...lj,...ij,...kl->...", gi, gi, x, y)
    else:
        raise DegreeOverflow("unsupported bidegree")
    return complex(np.sum(dens * _volume_weight(metric)))


def lefschetz_L(form, metric):
    """Wedge with omega = (1/2) d eta = i ghat."""
    chart = form.chart
    if (form.p, form.q) != (0, 0):
        raise DegreeOverflow("L implemented on functions")
    ghat, _ = _hat(metric)
    return BasicForm(chart, 1, 1, 1j * ghat * form.c[..., None, None])


def lefschetz_lambda(form, metric):
    """Pointwise adjoint of L; on (1,1)-forms, with Lambda(omega) = n."""
    chart = form.chart
    if (form.p, form.q) != (1, 1):
        raise DegreeOverflow("Lambda implemented on (1,1)-forms")
    _, gi = _hat(metric)
    out = -1j * np.einsum("...ij,...ij->...", gi, form.c)
    return BasicForm(chart, 0, 0, out)


# ---------------------------------------------------------------------------
# test fields
# ---------------------------------------------------------------------------

def periodic_test_chart(M, eps=0.05, seed=0, n=1):
    """Quadratic reference plus a small periodic trigonometric potential."""
    Q = 0.5 * np.eye(n)
    h = 2.0 * np.pi / M
    origin = -np.pi * np.ones(2 * n)
    axes = [origin[a] + h * np.arange(M) for a in range(2 * n)]
    grids = np.meshgrid(*axes, indexing="ij")
    rng = np.random.default_rng(seed)
    G = np.zeros(grids[0].shape)
    z = [grids[2 * i] + 1j * grids[2 * i + 1] for i in range(n)]
    for i in range(n):
        for j in range(n):
            G += np.real(Q[i, j] * z[i] * np.conj(z[j]))
    for _ in range(4):  # at most 4 Fourier modes, fixed seed
        k = rng.integers(-2, 3, size=2 * n)
        ph = rng.uniform(0, 2 * np.pi)
        wave = ph
        for a in range(2 * n):
            wave = wave + k[a] * grids[a]
        G += eps * rng.uniform(0.3, 1.0) * np.cos(wave)
    return build_chart(G, n, {"kind": "periodic", "reference": Q},
                       spacing=h, origin=origin)


def random_basic_function(chart, seed=0):
    """Smooth periodic field from at most 4 low Fourier modes, fixed seed."""
    rng = np.random.default_rng(seed)
    grids = np.meshgrid(*[chart.axis_points(a)
                          for a in range(2 * chart.n)], indexing="ij")
    f = np.zeros(grids[0].shape)
    for _ in range(4):
        k = rng.integers(-2, 3, size=2 * chart.n)
        ph = rng.uniform(0, 2 * np.pi)
        wave = ph
        for a in range(2 * chart.n):
            wave = wave + k[a] * grids[a]
        f += rng.uniform(0.3, 1.0) * np.cos(wave)
    return f


def random_form(chart, p, q, seed=0):
    """Random smooth basic (p, q)-form with complex trigonometric entries."""
    n = chart.n
    k = p + q
    if k == 0:
        c = (random_basic_function(chart, seed)
             + 1j * random_basic_function(chart, seed + 101))
    else:
        comps = []
        for idx in range(n ** k):
            comps.append(random_basic_function(chart, seed + 2 * idx)
                         + 1j * random_basic_function(chart,
                                                      seed + 2 * idx + 1))
        c = np.stack(comps, axis=-1).reshape(chart.G.shape + (n,) * k)
    return BasicForm(chart, p, q, c)


# ---------------------------------------------------------------------------
# identity residuals
# ---------------------------------------------------------------------------

def _commutator_sign(p, q):
    return -1.0 if (p + q) % 2 == 0 else 1.0


def _relative(lhs, rhs):
    """Max-norm residual normalized by the size of the compared operators."""
    scale = max(1.0, float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
    return float(np.max(np.abs(lhs - rhs))) / scale


def kahler_identities_residual(chart, seed=0):
    """Normalized max residuals of the commutator and Laplacian identities.

    Batteries: the del-commutator on (0,1)- and (1,1)-forms, the
    delbar-commutator on (1,0)- and (1,1)-forms (at n = 1 the degree-raising
    member of each commutator vanishes, so Lambda only acts on the (1,1)
    block), and the function Laplacian pair.
    """
    metric = metric_from_chart(chart)
    out = {}
    # [Lambda, del] = s i delbar*
    res = 0.0
    for p, q, sd in ((0, 1, seed + 1), (1, 1, seed + 11)):
        phi = random_form(chart, p, q, seed=sd)
        lam_phi = lefschetz_lambda(phi, metric) if (p, q) == (1, 1) else None
        lhs = -del_B(lam_phi).c if lam_phi is not None \
            else lefschetz_lambda(del_B(phi), metric).c
        rhs = _commutator_sign(p, q) * 1j * delbar_star(phi, metric).c
        res = max(res, _relative(lhs, rhs))
    out["commutator_del"] = res
    # [Lambda, delbar] = s i del*
    res = 0.0
    for p, q, sd in ((1, 0, seed + 31), (1, 1, seed + 41)):
        psi = random_form(chart, p, q, seed=sd)
        lam_psi = lefschetz_lambda(psi, metric) if (p, q) == (1, 1) else None
        lhs = -delbar_B(lam_psi).c if lam_psi is not None \
            else lefschetz_lambda(delbar_B(psi), metric).c
        rhs = _commutator_sign(p, q) * 1j * del_star(psi, metric).c
        res = max(res, _relative(lhs, rhs))
    out["commutator_delbar"] = res
    # Laplacian pair on functions: the real Hodge Laplacian (assembled
    # independently from compact real stencils) equals twice the
    # dbar-Laplacian
    f = random_basic_function(chart, seed + 61)
    F = BasicForm(chart, 0, 0, f.astype(complex))
    lap_dbar = delbar_star(delbar_B(F), metric).c
    lap_B = -_laplace_beltrami(chart, metric, f)
    out["laplacian_pair"] = _relative(lap_B, 2.0 * lap_dbar)
    return out


def _laplace_beltrami(chart, metric, f):
    """Real Laplace-Beltrami operator on functions, compact real stencils.

    Implemented for one complex dimension on periodic charts, where the real
    surface metric is conformal: Delta_LB f = (f_xx + f_yy) / g^T.  This is
    deliberately a different discretization from the Wirtinger assembly so
    the identity check carries an honest O(h^2) residual.
    """
    if chart.n != 1:
        raise DegreeOverflow("real Laplacian check implemented for n = 1")
    if not all(chart.periodic):
        raise NonPeriodicChart("compact stencils need a periodic chart")
    lam = np.real(metric.g[..., 0, 0])
    out = np.zeros_like(f)
    for ax in (0, 1):
        h = chart.hs[ax]
        out = out + (np.roll(f, -1, axis=ax) - 2.0 * f
                     + np.roll(f, 1, axis=ax)) / (h * h)
    return out / lam


def weitzenbock_residual(curv, form):
    """Residual of the curvature-corrected Bochner identity.

    (0,1)-forms:  Delta_dbar psi_l = -ghat^{ij} nabla_i nabla_bar_j psi_l
                                     + ghat^{pm} rho_{pl} psi_m.
    (1,1)-forms:  two extra terms enter, one with the full analytic
                  curvature tensor riem / 4 and one with the Ricci form.
    """
    metric = curv.metric
    chart = form.chart
    _, gi = _hat(metric)
    rho = curv.ricci_form
    if (form.p, form.q) == (0, 1):
        lhs = _laplacian_dbar(form, metric).c
        cov = _nabla_anti(chart, metric, form.c, 0, 1)   # axes: l, j
        cov2 = _nabla_holo(chart, metric, cov, 0)        # axes: l, j, i
        rough = -np.einsum("...ij,...lji->...l", gi, cov2)
        curvterm = np.einsum("...pm,...pl,...m->...l", gi, rho, form.c)
        rhs = rough + curvterm
    elif (form.p, form.q) == (1, 1):
        lhs = _laplacian_dbar(form, metric).c
        cov = _nabla_anti(chart, metric, form.c, 1, 1)   # axes: k, l, j
        cov2 = _nabla_holo(chart, metric, cov, 1)        # axes: k, l, j, i
        rough = -np.einsum("...ij,...klji->...kl", gi, cov2)
        riem_hat = curv.riem / 4.0
        t2 = -np.einsum("...ij,...qs,...iskl,...qj->...kl",
                        gi, gi, riem_hat, form.c)
        t3 = np.einsum("...ps,...pl,...ks->...kl", gi, rho, form.c)
        rhs = rough + t2 + t3
    else:
        raise DegreeOverflow("weitzenbock implemented for (0,1) and (1,1)")
    return _relative(lhs, rhs)


def _laplacian_dbar(form, metric):
    """Delta_dbar = delbar delbar* + delbar* delbar, skipping absent degrees."""
    chart = form.chart
    total = np.zeros_like(form.c)
    if form.q >= 1:
        total = total + delbar_B(delbar_star(form, metric)).c
    if form.q + 1 <= chart.n and form.q < 2:
        total = total + delbar_star(delbar_B(form), metric).c
    return BasicForm(chart, form.p, form.q, total)


def ibp_check(phi, psi, metric):
    """Residual of the integration-by-parts formula on a periodic chart.

    | int < ghat^{ij} nabla_i nabla_bar_j phi, psi >
      + int ghat^{ij} < nabla_bar_j phi, nabla_bar_i psi > |
    with the free indices contracted as in the L2 pairing.  Machine zero on
    flat periodic charts by summation by parts of the centered differences.
    """
    chart = phi.chart
    if not all(chart.periodic):
        raise NonPeriodicChart("integration by parts needs a periodic chart")
    if (phi.p, phi.q) != (1, 1) or (psi.p, psi.q) != (1, 1):
        raise DegreeOverflow("ibp_check implemented for (1,1)-forms")
    _, gi = _hat(metric)
    w = _volume_weight(metric)
    covb = _nabla_anti(chart, metric, phi.c, 1, 1)       # axes: k, l, j
    cov2 = _nabla_holo(chart, metric, covb, 1)           # axes: k, l, j, i
    rough = np.einsum("...ij,...klji->...kl", gi, cov2)
    term1 = np.sum(w * np.einsum("...kp,...ml,...kl,...pm->...",
                                 gi, gi, rough, np.conj(psi.c)))
    covb_psi = _nabla_anti(chart, metric, psi.c, 1, 1)   # axes: p, m, i
    dens = np.einsum("...ij,...kp,...ml,...klj,...pmi->...",
                     gi, gi, gi, covb, np.conj(covb_psi))
    term2 = np.sum(w * dens)
    return float(np.abs(term1 + term2))
