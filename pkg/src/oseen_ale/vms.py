"""Projection-based scale separation of the resolved velocity gradient.

The large-scale gradient is the cellwise L2 projection of grad u onto a
discontinuous tensor space L_H on the same triangulation (piecewise
constants by default). The fine-scale gradient is the remainder, and the
turbulent viscosity acts only on it.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import NegativeViscosity
from .fem import _blockdiag, _scatter, evaluate, geometry, stiffness_matrix


@dataclass(eq=False)
class CoarseProjector:
    space: object
    geo: object
    degree: int = 0

    def __post_init__(self):
        if self.degree not in (0, 1):
            raise ValueError("coarse degree must be 0 or 1")
        lam = self.geo.rule.points
        self._psi = np.ones((len(lam), 1)) if self.degree == 0 else lam.copy()
        Ml = np.einsum("cq,qa,qb->cab", self.geo.dx, self._psi, self._psi)
        self._Minv = np.linalg.inv(Ml)

    def _coarse_coefficients(self, G):
        b = np.einsum("cq,qk,cq...->ck...", self.geo.dx, self._psi, G)
        return np.einsum("ckl,cl...->ck...", self._Minv, b)

    def apply(self, G):
        """Project quadrature-point data ``G`` of shape (nc, nq, ...) onto L_H."""
        return np.einsum("qk,ck...->cq...", self._psi, self._coarse_coefficients(G))

    def inner(self, G, H):
        """L2 inner product of quadrature-point data on the projector's configuration."""
        w = self.geo.dx.reshape(self.geo.dx.shape + (1,) * (np.ndim(G) - 2))
        return float(np.sum(w * G * H))


def build_projector(velocity_space, ale_map, tau, degree=0, order=4):
    return CoarseProjector(velocity_space, geometry(ale_map, tau, order), degree)


def fine_scale_matrix(space, geo, degree=0):
    """Unit-viscosity operator int (I-P) grad phi_j : (I-P) grad phi_i."""
    proj = CoarseProjector(space, geo, degree)
    _, grads = geo.tables(space)
    c = proj._coarse_coefficients(grads)  # (nc, ncoarse, nloc, 2)
    b = np.einsum("cq,qk,cqaj->ckaj", geo.dx, proj._psi, grads)
    local = np.einsum("ckaj,ckbj->cab", b, c)
    n = space.num_scalar
    coarse = _blockdiag(space, _scatter(space.dof_map, space.dof_map, local, (n, n)))
    return (stiffness_matrix(space, geo) - coarse).tocsr()


@dataclass(eq=False)
class FineScaleDiffusion:
    mu_T: float
    operator: sp.csr_matrix


def assemble_fine_scale_diffusion(projector, mu_T):
    if mu_T < 0:
        raise NegativeViscosity(f"mu_T must be non-negative, got {mu_T}")
    S = fine_scale_matrix(projector.space, projector.geo, projector.degree)
    return FineScaleDiffusion(float(mu_T), (mu_T * S).tocsr())


def scale_split(u, projector):
    """Return (P grad u, (I-P) grad u) at the projector's quadrature points."""
    _, g = evaluate(u, projector.geo)
    coarse = projector.apply(g)
    return coarse, g - coarse
