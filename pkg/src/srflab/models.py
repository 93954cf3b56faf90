"""Closed-form model geometries: round odd spheres over projective space.

The round (2n+1)-sphere fibers over complex projective n-space; its
transverse structure is the Fubini-Study metric.  All tensors here are
evaluated analytically (no differencing), so identity suites can run at
1e-10 tolerances.  A D-homothety parameter a rescales the transverse metric
(a = 1 is the unit round sphere; a = 2(n+1) is the flow fixed point where
the transverse Ricci tensor equals the transverse metric).

Conventions match geom_core: Hermitian arrays store M_{ij} pairing v_i with
conj(w_j); riem is normalized so its g_inv-trace is Ric^T = 2 rho, giving
riem = (2/a)(g g + g g) on these models and real-frame scalars
R^T = 4 n (n+1) / a (8 on the unit 3-sphere, 24 on the unit 5-sphere).
"""

import numpy as np

from .errors import NonPositiveParameter


class RoundSphereModel:
    """Analytic transverse data of the round S^{2n+1}, D-homothety a."""

    def __init__(self, n, a=1.0):
        if not a > 0:
            raise NonPositiveParameter("homothety parameter must be positive")
        self.n = int(n)
        self.a = float(a)
        # fiber length of the generic Reeb orbit: 2 pi on the unit sphere,
        # scaled by a under the D-homothety (eta~ = a eta)
        self.fiber_length = 2.0 * np.pi * self.a

    def gT(self, z):
        """Transverse metric 2a * (FS Hessian) at the chart point z."""
        z = np.asarray(z, dtype=complex)
        r2 = float(np.real(z @ np.conj(z)))
        eye = np.eye(self.n)
        mat = ((1.0 + r2) * eye - np.outer(np.conj(z), z)) / (1.0 + r2) ** 2
        return self.a * mat  # 2a * (1/2) * [...]

    def riem(self, z):
        """Curvature tensor riem_{ij kl} = (2/a)(g_{ij}g_{kl}+g_{il}g_{kj})."""
        g = self.gT(z)
        return (2.0 / self.a) * (np.einsum("ij,kl->ijkl", g, g)
                                 + np.einsum("il,kj->ijkl", g, g))

    def scalar_RT(self):
        """Real-frame transverse scalar curvature (constant)."""
        return 4.0 * self.n * (self.n + 1) / self.a

    def scalar_ambient(self):
        """Real ambient scalar curvature R = R^T - 2n."""
        return self.scalar_RT() - 2.0 * self.n

    def sample_points(self, count, seed=0):
        """Deterministic chart points, including the origin."""
        rng = np.random.default_rng(seed)
        pts = [np.zeros(self.n, dtype=complex)]
        for _ in range(count - 1):
            re = rng.uniform(-1.2, 1.2, self.n)
            im = rng.uniform(-1.2, 1.2, self.n)
            pts.append(re + 1j * im)
        return pts
