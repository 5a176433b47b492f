"""Taylor-Hood P2/P1 spaces on moving triangulations, assembly and norms.

Basis functions live on the reference mesh and are transported with the
ALE map, so a coefficient vector means the same function on every
configuration; only the integrals change with the configuration time.

Velocity dofs are blocked by component: ``[u1 nodes..., u2 nodes...]``.
Assembled operators are ``scipy.sparse.csr_matrix``.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import InvertedCell
from .fields import AnalyticField
from .geometry import cell_frames, det2, inv2
from .quadrature import triangle_rule

# local P2 ordering: vertices 0,1,2 then edges (1,2), (2,0), (0,1)
LOCAL_EDGES = ((1, 2), (2, 0), (0, 1))
_DLAM = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def p1_values(lam):
    return np.asarray(lam, dtype=float).copy()


def p1_grads(lam):
    return np.broadcast_to(_DLAM, (len(lam), 3, 2)).copy()


def p2_values(lam):
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    return np.column_stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
         4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1]
    )


def p2_grads(lam):
    out = np.empty((len(lam), 6, 2))
    for i in range(3):
        out[:, i, :] = (4 * lam[:, i] - 1)[:, None] * _DLAM[i]
    for k, (a, b) in enumerate(LOCAL_EDGES):
        out[:, 3 + k, :] = 4 * (lam[:, b, None] * _DLAM[a] + lam[:, a, None] * _DLAM[b])
    return out


@dataclass(frozen=True, eq=False)
class FunctionSpace:
    kind: str  # "velocity" or "pressure"
    mesh: object
    degree: int
    ncomp: int
    dof_map: np.ndarray  # (nc, nloc) scalar node indices
    num_scalar: int

    @property
    def num_dofs(self):
        return self.ncomp * self.num_scalar

    @property
    def nloc(self):
        return self.dof_map.shape[1]

    def values(self, lam):
        return p2_values(lam) if self.degree == 2 else p1_values(lam)

    def ref_grads(self, lam):
        return p2_grads(lam) if self.degree == 2 else p1_grads(lam)

    def node_positions(self, vertex_positions):
        if self.degree == 1:
            return np.asarray(vertex_positions)
        e = self.mesh.edges
        mid = 0.5 * (vertex_positions[e[:, 0]] + vertex_positions[e[:, 1]])
        return np.vstack([vertex_positions, mid])

    def boundary_nodes(self, tags=None):
        """Scalar nodes lying on boundary edges whose tag is in ``tags`` (all if None)."""
        m = self.mesh
        sel = np.ones(len(m.boundary_edges), bool)
        if tags is not None:
            sel = np.isin(m.boundary_edge_markers, list(tags))
        bedges = m.boundary_edges[sel]
        nodes = [np.unique(m.edges[bedges].ravel())]
        if self.degree == 2:
            nodes.append(m.num_vertices + bedges)
        return np.unique(np.concatenate(nodes))

    def component_dofs(self, scalar_nodes):
        scalar_nodes = np.asarray(scalar_nodes)
        return np.concatenate([k * self.num_scalar + scalar_nodes for k in range(self.ncomp)])

    @cached_property
    def cell_dofs(self):
        return np.hstack([k * self.num_scalar + self.dof_map for k in range(self.ncomp)])


def taylor_hood(mesh):
    """Velocity P2 (vector) and pressure P1 spaces on ``mesh``."""
    p2 = np.hstack([mesh.cells, mesh.num_vertices + mesh.cell_edges])
    V = FunctionSpace("velocity", mesh, 2, 2, p2, mesh.num_vertices + len(mesh.edges))
    Q = FunctionSpace("pressure", mesh, 1, 1, mesh.cells.copy(), mesh.num_vertices)
    return V, Q


def scalar_p2(mesh):
    V, _ = taylor_hood(mesh)
    return FunctionSpace("scalar", mesh, 2, 1, V.dof_map, V.num_scalar)


@dataclass(eq=False)
class FeField:
    space: FunctionSpace
    coefficients: np.ndarray
    config_time: float = 0.0

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.num_dofs,):
            raise ValueError(
                f"expected {self.space.num_dofs} coefficients, got {self.coefficients.shape}"
            )

    def components(self):
        return self.coefficients.reshape(self.space.ncomp, self.space.num_scalar)


@dataclass(eq=False)
class CellGeometry:
    """Quadrature data of one configuration of the mesh."""

    tau: float
    positions: np.ndarray  # vertex coordinates at tau
    x0: np.ndarray
    F: np.ndarray
    det: np.ndarray
    invF: np.ndarray
    rule: object
    xq: np.ndarray  # (nc, nq, 2)
    dx: np.ndarray  # (nc, nq)
    _tables: dict = field(default_factory=dict, repr=False)

    def tables(self, space):
        """(values (nq, nloc), physical gradients (nc, nq, nloc, 2))."""
        key = space.degree
        if key not in self._tables:
            lam = self.rule.points
            vals = space.values(lam)
            grads = np.einsum("qak,ckj->cqaj", space.ref_grads(lam), self.invF)
            self._tables[key] = (vals, grads)
        return self._tables[key]


def geometry_from_positions(mesh, positions, tau=0.0, order=4, check=True):
    x0, F = cell_frames(positions, mesh.cells)
    det = det2(F)
    if check and np.any(det <= 0):
        bad = np.flatnonzero(det <= 0)
        raise InvertedCell(f"{len(bad)} inverted cell(s) at t={tau}", bad, tau)
    rule = triangle_rule(order)
    xq = x0[:, None, :] + np.einsum("cij,qj->cqi", F, rule.xi)
    dx = det[:, None] * rule.weights[None, :]
    return CellGeometry(tau, positions, x0, F, det, inv2(F), rule, xq, dx)


def geometry(ale_map, tau, order=4):
    return geometry_from_positions(ale_map.reference, ale_map.positions(tau), tau, order)


def _scatter(rows, cols, local, shape):
    r = np.broadcast_to(rows[:, :, None], local.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], local.shape).ravel()
    return sp.coo_matrix((local.ravel(), (r, c)), shape=shape).tocsr()


def _blockdiag(space, scalar):
    if space.ncomp == 1:
        return scalar
    return sp.block_diag([scalar] * space.ncomp, format="csr")


def _eval_field(fn, geo):
    if fn is None:
        return None
    if isinstance(fn, FeField):
        return evaluate(fn, geo)[0]
    if isinstance(fn, AnalyticField):
        return np.asarray(fn(geo.tau, geo.xq), dtype=float)
    return np.asarray(fn(geo.xq), dtype=float)


# ---- matrices on a given configuration ----

def mass_matrix(space, geo, weight=None):
    vals, _ = geo.tables(space)
    w = geo.dx if weight is None else geo.dx * weight
    local = np.einsum("cq,qa,qb->cab", w, vals, vals)
    n = space.num_scalar
    return _blockdiag(space, _scatter(space.dof_map, space.dof_map, local, (n, n)))


def stiffness_matrix(space, geo, form="grad"):
    _, grads = geo.tables(space)
    n = space.num_scalar
    if form == "grad" or space.ncomp == 1:
        local = np.einsum("cq,cqai,cqbi->cab", geo.dx, grads, grads)
        return _blockdiag(space, _scatter(space.dof_map, space.dof_map, local, (n, n)))
    if form != "symgrad":
        raise ValueError(f"unknown diffusion form {form!r}")
    # 2 D(phi):D(psi) for vector basis e_k phi_a
    nl = space.nloc
    G = np.zeros(grads.shape[:2] + (2 * nl, 2, 2))
    for k in range(2):
        G[:, :, k * nl:(k + 1) * nl, k, :] = grads
    D = 0.5 * (G + np.swapaxes(G, -1, -2))
    local = 2.0 * np.einsum("cq,cqaij,cqbij->cab", geo.dx, D, D)
    return _scatter(space.cell_dofs, space.cell_dofs, local, (space.num_dofs,) * 2)


def convection_matrix(space, geo, a_q):
    """N_ij = int ((a . grad) phi_j) . phi_i with advector values ``a_q`` (nc, nq, 2)."""
    vals, grads = geo.tables(space)
    adg = np.einsum("cqi,cqbi->cqb", a_q, grads)
    local = np.einsum("cq,qa,cqb->cab", geo.dx, vals, adg)
    n = space.num_scalar
    return _blockdiag(space, _scatter(space.dof_map, space.dof_map, local, (n, n)))


def divergence_matrix(V, Q, geo):
    """B_qi = int q (div phi_i), shape (Q.num_dofs, V.num_dofs)."""
    qv, _ = geo.tables(Q)
    _, grads = geo.tables(V)
    blocks = [np.einsum("cq,qa,cqb->cab", geo.dx, qv, grads[..., k]) for k in range(2)]
    local = np.concatenate(blocks, axis=2)
    return _scatter(Q.dof_map, V.cell_dofs, local, (Q.num_dofs, V.num_dofs))


def mean_functional(Q, geo):
    """Row vector l_j = int psi_j."""
    qv, _ = geo.tables(Q)
    local = np.einsum("cq,qa->ca", geo.dx, qv)
    return np.bincount(Q.dof_map.ravel(), local.ravel(), minlength=Q.num_dofs)


def load_vector(space, geo, f_q):
    vals, _ = geo.tables(space)
    if space.ncomp == 1:
        f_q = f_q[..., None] if f_q.ndim == 2 else f_q
    out = []
    for k in range(space.ncomp):
        local = np.einsum("cq,cq,qa->ca", geo.dx, f_q[..., k], vals)
        out.append(np.bincount(space.dof_map.ravel(), local.ravel(), minlength=space.num_scalar))
    return np.concatenate(out)


def evaluate(u, geo):
    """Values (nc, nq, ncomp) and gradients (nc, nq, ncomp, 2) of a field."""
    space = u.space
    vals, grads = geo.tables(space)
    coef = u.components()[:, space.dof_map]  # (ncomp, nc, nloc)
    v = np.einsum("qa,kca->cqk", vals, coef)
    g = np.einsum("cqaj,kca->cqkj", grads, coef)
    return v, g


# ---- public assembly on (map, tau) ----

def assemble_mass(space, ale_map, tau, order=4):
    return mass_matrix(space, geometry(ale_map, tau, order))


def assemble_diffusion(space, ale_map, tau, order=4, form="grad"):
    return stiffness_matrix(space, geometry(ale_map, tau, order), form)


def assemble_convection(space, ale_map, tau, advector, order=4):
    geo = geometry(ale_map, tau, order)
    a_q = _eval_field(advector, geo)
    return convection_matrix(space, geo, a_q)


def assemble_divergence(velocity_space, pressure_space, ale_map, tau, order=4):
    return divergence_matrix(velocity_space, pressure_space, geometry(ale_map, tau, order))


def assemble_load(space, ale_map, tau, f, order=4):
    geo = geometry(ale_map, tau, order)
    return load_vector(space, geo, _eval_field(f, geo))


def interpolate(space, ale_map, tau, fn):
    """Nodal interpolant of ``fn(x)`` on the configuration at ``tau``."""
    x = space.node_positions(ale_map.positions(tau))
    v = np.asarray(fn(x), dtype=float).reshape(len(x), -1)
    return FeField(space, v.T.ravel().copy(), tau)


def field_norms(u, ale_map, tau, order=4):
    """L2, H1-seminorm and the componentwise L^{1,2} norm on the configuration at ``tau``."""
    geo = geometry(ale_map, tau, order)
    return norms_on(u, geo)


def norms_on(u, geo):
    v, g = evaluate(u, geo)
    comp_sq = np.einsum("cq,cqk->k", geo.dx, v ** 2)
    grad_sq = np.einsum("cq,cqkj->", geo.dx, g ** 2)
    return {
        "l2": float(np.sqrt(comp_sq.sum())),
        "h1_semi": float(np.sqrt(grad_sq)),
        "l12": float(np.sqrt(comp_sq).sum()),
    }
