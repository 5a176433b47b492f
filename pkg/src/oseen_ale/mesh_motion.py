"""Reference mesh, prescribed domain motions and their time-discrete ALE map.

Between grid times the discrete map interpolates nodal positions linearly,
so the mesh velocity is constant on each interval and every cell stays
affine. In 2D the cell Jacobian determinant is then quadratic in time,
which is why a one-point midpoint rule reproduces mass-matrix changes
exactly.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy as np

from .errors import IndexOutOfRange, InvertedCell
from .geometry import cell_frames, det2, inv2, row_sum_norm
from .quadrature import time_rule, triangle_rule


@dataclass(frozen=True, eq=False)
class ReferenceMesh:
    nodes: np.ndarray
    cells: np.ndarray
    boundary_markers: np.ndarray
    boundary_edge_markers: np.ndarray = None
    edges: np.ndarray = field(init=False, repr=False)
    cell_edges: np.ndarray = field(init=False, repr=False)
    boundary_edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        cells = np.asarray(self.cells, dtype=np.int64)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "boundary_markers", np.asarray(self.boundary_markers, dtype=int))
        if cells.min() < 0 or cells.max() >= len(nodes):
            raise ValueError("cell vertex index out of range")
        _, F = cell_frames(nodes, cells)
        if np.any(det2(F) <= 0):
            raise ValueError("cells must have positive signed area")

        local = np.array([(1, 2), (2, 0), (0, 1)])
        all_edges = np.sort(cells[:, local], axis=-1).reshape(-1, 2)
        edges, inverse, counts = np.unique(
            all_edges, axis=0, return_inverse=True, return_counts=True
        )
        if counts.max() > 2:
            raise ValueError("non-manifold edge")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "cell_edges", inverse.reshape(-1, 3))
        bedges = np.flatnonzero(counts == 1)
        object.__setattr__(self, "boundary_edges", bedges)
        if self.boundary_edge_markers is None:
            m = self.boundary_markers[edges[bedges]]
            object.__setattr__(self, "boundary_edge_markers", np.maximum(m[:, 0], m[:, 1]))
        else:
            object.__setattr__(
                self, "boundary_edge_markers", np.asarray(self.boundary_edge_markers, dtype=int)
            )

    @property
    def num_vertices(self):
        return len(self.nodes)

    @property
    def num_cells(self):
        return len(self.cells)


def unit_square(nx, ny, lx=1.0, ly=1.0):
    """Structured triangulation with 2*nx*ny right triangles, row-major nodes.

    Boundary tags: 1 bottom, 2 right, 3 top, 4 left (corners carry the
    first matching tag in that order).
    """
    if nx < 1 or ny < 1:
        raise ValueError("nx, ny must be positive")
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    v00, v10 = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    v01, v11 = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    cells = np.empty((2 * nx * ny, 3), dtype=np.int64)
    cells[0::2] = np.column_stack([v00, v10, v11])
    cells[1::2] = np.column_stack([v00, v11, v01])

    tol = 1e-12
    side = np.zeros(len(nodes), int)
    for tag, mask in ((4, nodes[:, 0] < tol), (3, nodes[:, 1] > ly - tol),
                      (2, nodes[:, 0] > lx - tol), (1, nodes[:, 1] < tol)):
        side[mask] = tag
    mesh = ReferenceMesh(nodes, cells, side, np.zeros(0, int))
    mid = nodes[mesh.edges[mesh.boundary_edges]].mean(axis=1)
    etag = np.select(
        [mid[:, 1] < tol, mid[:, 0] > lx - tol, mid[:, 1] > ly - tol, mid[:, 0] < tol],
        [1, 2, 3, 4], 0,
    )
    object.__setattr__(mesh, "boundary_edge_markers", etag)
    return mesh


# ---- motion programs ----

@dataclass(frozen=True)
class MotionProgram:
    """Analytic ALE map ``displacement(t, Y) -> x`` and its time derivative."""

    name: str
    displacement: Callable
    displacement_time_derivative: Callable
    params: Dict = field(default_factory=dict)


def _stationary():
    return MotionProgram("stationary", lambda t, Y: np.array(Y, float), lambda t, Y: np.zeros_like(Y, float))


def _translation(vx=1.0, vy=0.0):
    v = np.array([vx, vy], float)
    return MotionProgram("translation", lambda t, Y: Y + t * v,
                         lambda t, Y: np.broadcast_to(v, np.shape(Y)).copy(), {"vx": vx, "vy": vy})


def _expansion(alpha=0.1):
    return MotionProgram("expansion", lambda t, Y: (1 + alpha * t) * np.asarray(Y, float),
                         lambda t, Y: alpha * np.asarray(Y, float), {"alpha": alpha})


def _shear(gamma=0.5):
    def disp(t, Y):
        Y = np.asarray(Y, float)
        return np.stack([Y[..., 0] + gamma * t * Y[..., 1], Y[..., 1]], axis=-1)

    def vel(t, Y):
        Y = np.asarray(Y, float)
        return np.stack([gamma * Y[..., 1], np.zeros_like(Y[..., 1])], axis=-1)

    return MotionProgram("shear", disp, vel, {"gamma": gamma})


def _smooth_expansion(amplitude=0.1):
    def disp(t, Y):
        Y = np.asarray(Y, float)
        return (1 + amplitude * t * np.sin(np.pi * Y[..., :1])) * Y

    def vel(t, Y):
        Y = np.asarray(Y, float)
        return amplitude * np.sin(np.pi * Y[..., :1]) * Y

    return MotionProgram("smooth-expansion", disp, vel, {"amplitude": amplitude})


def _pulsating(amplitude=0.05, frequency=1.0):
    def bump(Y):
        Y = np.asarray(Y, float)
        return np.sin(np.pi * Y[..., :1]) * np.sin(np.pi * Y[..., 1:2])

    def disp(t, Y):
        return np.asarray(Y, float) + amplitude * np.sin(2 * np.pi * frequency * t) * bump(Y)

    def vel(t, Y):
        c = 2 * np.pi * frequency * amplitude * np.cos(2 * np.pi * frequency * t)
        return np.broadcast_to(c * bump(Y), np.shape(Y)).copy()

    return MotionProgram("pulsating", disp, vel, {"amplitude": amplitude, "frequency": frequency})


def _quadratic(beta=1.0):
    return MotionProgram("quadratic", lambda t, Y: (1 + beta * t * t) * np.asarray(Y, float),
                         lambda t, Y: 2 * beta * t * np.asarray(Y, float), {"beta": beta})


MOTIONS = {
    "stationary": _stationary,
    "translation": _translation,
    "expansion": _expansion,
    "shear": _shear,
    "smooth-expansion": _smooth_expansion,
    "pulsating": _pulsating,
    "quadratic": _quadratic,
}

STANDARD_MOTIONS = ("stationary", "translation", "expansion", "shear")


def make_motion(name, **params):
    try:
        factory = MOTIONS[name]
    except KeyError:
        raise KeyError(f"unknown motion {name!r}; known: {sorted(MOTIONS)}") from None
    return factory(**params)


# ---- discrete ALE map ----

def uniform_grid(dt, n_steps, t0=0.0):
    return t0 + dt * np.arange(n_steps + 1)


@dataclass(frozen=True, eq=False)
class DiscreteAleMap:
    time_grid: np.ndarray
    nodal_positions: np.ndarray  # (N+1, nv, 2)
    reference: ReferenceMesh

    @property
    def dt(self):
        return float(self.time_grid[1] - self.time_grid[0])

    @property
    def n_intervals(self):
        return len(self.time_grid) - 1

    def interval_of(self, tau):
        tg = self.time_grid
        span = tg[-1] - tg[0]
        if tau < tg[0] - 1e-12 * span or tau > tg[-1] + 1e-12 * span:
            raise IndexOutOfRange(f"time {tau} outside [{tg[0]}, {tg[-1]}]")
        n = int(np.floor((tau - tg[0]) / self.dt))
        return min(max(n, 0), self.n_intervals - 1)

    def positions(self, tau):
        n = self.interval_of(tau)
        t0, t1 = self.time_grid[n], self.time_grid[n + 1]
        s = (tau - t0) / (t1 - t0)
        if s == 0.0:
            return self.nodal_positions[n]
        if s == 1.0:
            return self.nodal_positions[n + 1]
        return s * self.nodal_positions[n + 1] + (1.0 - s) * self.nodal_positions[n]

    def midpoint(self, n):
        return 0.5 * (self.time_grid[n] + self.time_grid[n + 1])


def build_discrete_map(mesh, motion, time_grid):
    tg = np.asarray(time_grid, dtype=float)
    if tg.ndim != 1 or len(tg) < 2:
        raise ValueError("time grid needs at least two points")
    d = np.diff(tg)
    if np.any(d <= 0):
        raise ValueError("time grid must be strictly increasing")
    if not np.allclose(d, d[0], rtol=1e-9, atol=0.0):
        raise ValueError("time grid must be uniform")
    pos = np.stack([np.asarray(motion.displacement(t, mesh.nodes), float) for t in tg])
    if tg[0] == 0.0:
        if not np.allclose(pos[0], mesh.nodes, atol=1e-12):
            raise ValueError(f"motion {motion.name!r} does not start at the identity")
        pos[0] = mesh.nodes
    amap = DiscreteAleMap(tg, pos, mesh)
    check_times = np.concatenate([tg, 0.5 * (tg[1:] + tg[:-1])])
    for t in check_times:
        det = det2(cell_frames(amap.positions(t), mesh.cells)[1])
        if np.any(det <= 0):
            raise InvertedCell(f"motion {motion.name!r} inverts cells at t={t}",
                               np.flatnonzero(det <= 0), t)
    return amap


@dataclass(frozen=True, eq=False)
class MeshVelocityField:
    interval_index: int
    nodal_values: np.ndarray  # (nv, 2) on vertices; P1 in space


def mesh_velocity(ale_map, n):
    if not 0 <= n < ale_map.n_intervals:
        raise IndexOutOfRange(f"interval {n} not in [0, {ale_map.n_intervals})")
    P = ale_map.nodal_positions
    dt = ale_map.time_grid[n + 1] - ale_map.time_grid[n]
    return MeshVelocityField(n, (P[n + 1] - P[n]) / dt)


def _velocity_gradients(ale_map, w):
    """Cellwise W with w(x0 + F xi) = w0 + W xi."""
    _, W = cell_frames(w.nodal_values, ale_map.reference.cells)
    return W


def mesh_velocity_divergence(ale_map, w, tau):
    """Cellwise constant div w_h on the configuration at ``tau``."""
    _, F = cell_frames(ale_map.positions(tau), ale_map.reference.cells)
    M = np.einsum("cij,cjk->cik", _velocity_gradients(ale_map, w), inv2(F))
    return M[:, 0, 0] + M[:, 1, 1]


def mesh_velocity_at(ale_map, w, rule):
    """P1 mesh velocity at the rule's points, (nc, nq, 2)."""
    nv = w.nodal_values[ale_map.reference.cells]  # (nc, 3, 2)
    return np.einsum("qa,cak->cqk", rule.points, nv)


def jacobian_determinant(ale_map, tau, cell=None):
    """det of the affine map from the reference (t=0 grid) cell to the cell at ``tau``."""
    cells = ale_map.reference.cells
    d_now = det2(cell_frames(ale_map.positions(tau), cells)[1])
    d_ref = det2(cell_frames(ale_map.reference.nodes, cells)[1])
    J = d_now / d_ref
    return J if cell is None else float(J[cell])


# ---- verifiers ----

def gcl_matrices(ale_map, n, time_rule_name="midpoint", order=4):
    """Return (M^{n+1} - M^n, quadrature of dt * int phi_i phi_j div w_h, M^n, M^{n+1})."""
    from .fem import geometry, mass_matrix, scalar_p2

    space = scalar_p2(ale_map.reference)
    t0, t1 = ale_map.time_grid[n], ale_map.time_grid[n + 1]
    dt = t1 - t0
    w = mesh_velocity(ale_map, n)
    M0 = mass_matrix(space, geometry(ale_map, t0, order))
    M1 = mass_matrix(space, geometry(ale_map, t1, order))
    rule = time_rule(time_rule_name)
    rhs = None
    for s, wt in zip(rule.nodes, rule.weights):
        tau = t0 + s * dt
        geo = geometry(ale_map, tau, order)
        div = mesh_velocity_divergence(ale_map, w, tau)
        term = (dt * wt) * mass_matrix(space, geo, weight=div[:, None])
        rhs = term if rhs is None else rhs + term
    return M1 - M0, rhs, M0, M1


def gcl_residuals(ale_map, n, pairs, time_rule_name="midpoint", order=4):
    """Relative GCL residuals for scalar P2 basis index pairs.

    Each residual is |LHS - RHS| scaled by sqrt(M_ii M_jj) (the Cauchy-Schwarz
    bound of the entry) taken at the larger of the two configurations.
    """
    pairs = np.atleast_2d(np.asarray(pairs, dtype=np.int64))
    lhs, rhs, M0, M1 = gcl_matrices(ale_map, n, time_rule_name, order)
    i, j = pairs[:, 0], pairs[:, 1]
    diff = np.asarray((lhs - rhs)[i, j]).ravel()
    d = np.maximum(M0.diagonal(), M1.diagonal())
    return np.abs(diff) / np.sqrt(d[i] * d[j])


def gcl_residual(ale_map, n, phi_i, phi_j, time_rule_name="midpoint", order=4):
    return float(gcl_residuals(ale_map, n, [(phi_i, phi_j)], time_rule_name, order)[0])


def transport_residual(ale_map, phi, n, time_rule_name="gauss5", order=6):
    """Relative residual of d/dt int phi = int phi div w over interval ``n``.

    ``phi`` is a function of reference coordinates Y. The left side is the
    difference quotient of the integrals at the interval ends; the right side
    averages int phi div w_h over the interval with the given time rule.
    The scale is max(|lhs|, |rhs|, mean |integral| / T) with T the grid span.
    """
    from .fem import geometry_from_positions

    mesh = ale_map.reference
    rule = triangle_rule(order)
    ref = geometry_from_positions(mesh, mesh.nodes, order=order)
    phi_q = np.asarray(phi(ref.xq), float)
    t0, t1 = ale_map.time_grid[n], ale_map.time_grid[n + 1]
    dt = t1 - t0
    w = mesh_velocity(ale_map, n)

    def det_at(tau):
        return det2(cell_frames(ale_map.positions(tau), mesh.cells)[1])

    def integral(tau, weight=None):
        d = det_at(tau) if weight is None else det_at(tau) * weight
        return float(np.einsum("cq,q,c->", phi_q, rule.weights, d))

    I0, I1 = integral(t0), integral(t1)
    lhs = (I1 - I0) / dt
    tr = time_rule(time_rule_name)
    rhs = sum(wt * integral(t0 + s * dt, mesh_velocity_divergence(ale_map, w, t0 + s * dt))
              for s, wt in zip(tr.nodes, tr.weights))
    span = ale_map.time_grid[-1] - ale_map.time_grid[0]
    scale = max(abs(lhs), abs(rhs), 0.5 * (abs(I0) + abs(I1)) / span)
    return abs(lhs - rhs) / scale if scale > 0 else 0.0


@dataclass(frozen=True)
class MappingNorms:
    sup_grad_w_hat: float
    sup_grad_map: float
    sup_div_w: float
    sup_div_ustar: float


def mapping_norms(ale_map, ustar, n, order=4):
    """Sup norms entering the time-step condition of the endpoint scheme.

    Matrix norms use the max absolute row sum. Mesh-velocity quantities are
    cellwise constant and exact; div u* is sampled at quadrature points and
    vertices of the configuration at t^{n+1}.
    """
    from .fem import geometry

    cells = ale_map.reference.cells
    t0, t1 = ale_map.time_grid[n], ale_map.time_grid[n + 1]
    w = mesh_velocity(ale_map, n)
    _, F0 = cell_frames(ale_map.reference.nodes, cells)
    F0inv = inv2(F0)
    DW = np.einsum("cij,cjk->cik", _velocity_gradients(ale_map, w), F0inv)
    grad_map = max(
        row_sum_norm(np.einsum("cij,cjk->cik", cell_frames(ale_map.positions(t), cells)[1], F0inv)).max()
        for t in (t0, t1)
    )
    div_w = mesh_velocity_divergence(ale_map, w, t1)
    geo = geometry(ale_map, t1, order)
    pts = np.concatenate([geo.xq.reshape(-1, 2), geo.positions])
    div_u = ustar.divergence(t1, pts) if ustar is not None else np.zeros(1)
    return MappingNorms(
        float(row_sum_norm(DW).max()),
        float(grad_map),
        float(np.abs(div_w).max()),
        float(np.abs(div_u).max()),
    )
