"""Executable forms of the stability and convergence statements.

Everything here consumes trajectories and returns plain records, so the
checks can be rerun on serialized ledgers without touching the solver.
"""
import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConditionViolated, WrongVariant
from .fem import geometry, mass_matrix, stiffness_matrix, taylor_hood
from .mesh_motion import MappingNorms, build_discrete_map, mapping_norms, uniform_grid
from .timestepper import ENDPOINT, GCL_MIDPOINT, SchemeConfig, run_simulation

NOISE_FLOOR = 1e-10
SLACK_TOL = 1e-10


def time_moment(k, dt):
    """Integral of (s - t^n)^k over one step of length ``dt``."""
    return dt ** (k + 1) / (k + 1)


def gronwall_envelope(dt, gammas, Bs, Cs, f0):
    """Discrete Gronwall bound exp(dt sum sigma_i gamma_i) (dt sum C_i + f0) for every n.

    ``gammas`` and ``Cs`` are indexed 0..N; entry n of the result bounds
    A_n + dt sum_{i<=n} B_i. The flag is False when some dt*gamma_i >= 1,
    in which case the bounds are meaningless (returned as inf).
    """
    g = np.asarray(gammas, float)
    c = np.asarray(Cs, float)
    b = np.asarray(Bs, float) if Bs is not None else np.zeros_like(g)
    if min(g.min(initial=0), c.min(initial=0), b.min(initial=0)) < 0 or f0 < 0:
        raise ValueError("Gronwall sequences must be non-negative")
    valid = bool(np.all(dt * g < 1))
    if not valid:
        return np.full(len(g), np.inf), False
    sigma = 1.0 / (1.0 - dt * g)
    bounds = np.exp(dt * np.cumsum(sigma * g)) * (dt * np.cumsum(c) + f0)
    return bounds, True


# -- ledgers ------------------------------------------------------------------

LEDGER_FIELDS = ("step", "time", "kinetic", "viscous", "fine", "load",
                 "cum_viscous", "cum_fine", "cum_load", "cum_sqrt_load")


@dataclass(eq=False)
class EnergyLedger:
    variant: str
    dt: float
    times: np.ndarray
    kinetic: np.ndarray
    viscous: np.ndarray
    fine: np.ndarray
    load: np.ndarray

    def __post_init__(self):
        for name in ("times", "kinetic", "viscous", "fine", "load"):
            setattr(self, name, np.asarray(getattr(self, name), float))
        if min(self.kinetic.min(), self.viscous.min(), self.fine.min(), self.load.min()) < -1e-14:
            raise ValueError("ledger entries must be non-negative")

    @classmethod
    def from_trajectory(cls, traj):
        r = traj.reports
        return cls(traj.config.variant, traj.config.dt, traj.times,
                   [x.kinetic for x in r], [x.viscous for x in r],
                   [x.fine for x in r], [x.load for x in r])

    @property
    def cum_viscous(self):
        return np.cumsum(self.viscous)

    @property
    def cum_fine(self):
        return np.cumsum(self.fine)

    @property
    def cum_load(self):
        return np.cumsum(self.load)

    @property
    def cum_sqrt_load(self):
        return np.cumsum(np.sqrt(np.maximum(self.load, 0.0)))

    def rows(self):
        cols = [self.times, self.kinetic, self.viscous, self.fine, self.load,
                self.cum_viscous, self.cum_fine, self.cum_load, self.cum_sqrt_load]
        for i in range(len(self.times)):
            yield [i] + [float(c[i]) for c in cols]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(f"# variant={self.variant} dt={self.dt!r}\n")
            w = csv.writer(fh)
            w.writerow(LEDGER_FIELDS)
            for row in self.rows():
                w.writerow([row[0]] + [f"{v:.17g}" for v in row[1:]])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            meta = dict(kv.split("=") for kv in fh.readline().lstrip("# ").split())
            data = list(csv.DictReader(fh))
        col = lambda k: [float(d[k]) for d in data]  # noqa: E731
        return cls(meta["variant"], float(meta["dt"]), col("time"), col("kinetic"),
                   col("viscous"), col("fine"), col("load"))


@dataclass
class StabilityCertificate:
    lhs: float
    rhs: float
    slack: float
    constants: Dict[str, float]
    holds: bool
    variant: str = GCL_MIDPOINT
    worst_step: int = 0

    @classmethod
    def build(cls, lhs, rhs, constants, variant):
        """Worst case over steps 1..N of per-step lhs/rhs arrays (step 0 is an identity)."""
        lhs, rhs = np.asarray(lhs, float), np.asarray(rhs, float)
        first = 1 if len(lhs) > 1 else 0
        slack = rhs - lhs
        slack[:first] = np.inf
        k = int(np.argmin(slack + SLACK_TOL * np.maximum(1.0, rhs)))
        holds = bool(np.all(slack >= -SLACK_TOL * np.maximum(1.0, rhs)))
        return cls(float(lhs[k]), float(rhs[k]), float(slack[k]), dict(constants), holds, variant, k)

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "slack": self.slack,
                "constants": self.constants, "holds": self.holds,
                "variant": self.variant, "worst_step": self.worst_step}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _ledger(traj_or_ledger):
    if isinstance(traj_or_ledger, EnergyLedger):
        return traj_or_ledger
    return EnergyLedger.from_trajectory(traj_or_ledger)


def gcl_stability_terms(ledger, mu, mu_T, C_omega=1.0):
    """Per-step (lhs, rhs) of the unconditional estimate for the GCL scheme."""
    dt = ledger.dt
    lhs = ledger.kinetic + dt * np.cumsum(3 * mu * ledger.viscous + mu_T * ledger.fine)
    rhs = ledger.kinetic[0] + dt * (1 + C_omega) / mu * ledger.cum_load
    return lhs, rhs


def certify_gcl_stability(traj, mu, mu_T, C_omega=1.0):
    led = _ledger(traj)
    if led.variant != GCL_MIDPOINT:
        raise WrongVariant(f"expected a {GCL_MIDPOINT!r} trajectory, got {led.variant!r}")
    lhs, rhs = gcl_stability_terms(led, mu, mu_T, C_omega)
    return StabilityCertificate.build(lhs, rhs, {"C_omega": C_omega}, GCL_MIDPOINT)


def nogcl_stability_terms(ledger, mu, mu_T):
    """Per-step lhs and the constant-free rhs base ||u0||^2 + sum ||f^i||_{-1}."""
    dt = ledger.dt
    lhs = ledger.kinetic + dt * np.cumsum(2 * mu * ledger.viscous + mu_T * ledger.fine)
    base = ledger.kinetic[0] + ledger.cum_sqrt_load
    return lhs, base


def nogcl_ratio(traj, mu, mu_T):
    """Largest lhs/base ratio over steps, the quantity C' has to dominate."""
    lhs, base = nogcl_stability_terms(_ledger(traj), mu, mu_T)
    ratio = np.where(base > 0, lhs / np.where(base > 0, base, 1.0), np.where(lhs > 0, np.inf, 0.0))
    return float(ratio[1:].max() if len(ratio) > 1 else ratio.max())


def calibrate_c_prime(trajectories, params, factor=1.5):
    """1.5x the largest observed ratio; ``params`` gives (mu, mu_T) per trajectory."""
    ratios = [nogcl_ratio(tr, mu, mu_T) for tr, (mu, mu_T) in zip(trajectories, params)]
    return factor * max(max(ratios), 0.0) if ratios else factor


def certify_nogcl_stability(traj, mu, mu_T, C_prime, condition):
    led = _ledger(traj)
    if led.variant != ENDPOINT:
        raise WrongVariant(f"expected an {ENDPOINT!r} trajectory, got {led.variant!r}")
    if condition is None or not condition.admissible:
        raise ConditionViolated("dt condition not satisfied; the estimate makes no claim")
    lhs, base = nogcl_stability_terms(led, mu, mu_T)
    return StabilityCertificate.build(lhs, C_prime * base, {"C_prime": C_prime}, ENDPOINT)


# -- time-step condition ------------------------------------------------------

@dataclass
class DtCondition:
    lhs: float
    bound: float
    admissible: bool
    norms: MappingNorms
    C: float
    dt: float
    interval: int = 0

    def to_dict(self):
        return {"lhs": self.lhs, "bound": self.bound, "admissible": self.admissible,
                "C": self.C, "dt": self.dt, "interval": self.interval,
                "norms": dict(vars(self.norms))}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["norms"] = MappingNorms(**d["norms"])
        return cls(**d)


def dt_admissible(norms, dt, C=1.0):
    if not C > 0:
        raise ValueError("the condition constant C must be positive")
    lhs = (C * dt ** 2 * norms.sup_grad_w_hat * norms.sup_grad_map * norms.sup_div_w
           - 0.5 * dt * norms.sup_div_ustar)
    return DtCondition(float(lhs), 0.5, bool(lhs <= 0.5), norms, float(C), float(dt))


def map_dt_condition(ale_map, ustar, C=1.0, order=4):
    """Worst interval of the discrete map (largest condition value)."""
    worst = None
    for n in range(ale_map.n_intervals):
        cond = dt_admissible(mapping_norms(ale_map, ustar, n, order), ale_map.dt, C)
        cond.interval = n
        if worst is None or cond.lhs > worst.lhs:
            worst = cond
    return worst


# -- GCL sampling -------------------------------------------------------------

def sample_basis_pairs(ale_map, samples, rng):
    """``samples`` distinct coupled (i, j) pairs of scalar P2 basis functions."""
    from .fem import scalar_p2

    space = scalar_p2(ale_map.reference)
    M = mass_matrix(space, geometry(ale_map, ale_map.time_grid[0])).tocoo()
    pairs = np.unique(np.stack([M.row, M.col], axis=1), axis=0)
    take = rng.choice(len(pairs), size=min(samples, len(pairs)), replace=False)
    return pairs[np.sort(take)]


def max_gcl_residual(ale_map, samples=50, time_rule_name="midpoint", seed=0, order=4):
    """Largest relative GCL residual over sampled basis pairs and every interval."""
    from .mesh_motion import gcl_residuals

    rng = np.random.default_rng(seed)
    pairs = sample_basis_pairs(ale_map, samples, rng)
    return max(float(gcl_residuals(ale_map, n, pairs, time_rule_name, order).max())
               for n in range(ale_map.n_intervals))


# -- discrete dual norm ---------------------------------------------------------

def h_minus1_surrogate(F, ale_map, tau, free=None, order=4):
    """F^T (A + M)^{-1} F over the velocity dofs in ``free`` (default: interior)."""
    V, _ = taylor_hood(ale_map.reference)
    if free is None:
        free = np.setdiff1d(np.arange(V.num_dofs), V.component_dofs(V.boundary_nodes()))
    geo = geometry(ale_map, tau, order)
    K = (stiffness_matrix(V, geo) + mass_matrix(V, geo))[free][:, free].tocsc()
    Ff = np.asarray(F, float)[free]
    return float(Ff @ spla.spsolve(K, Ff))


# -- temporal convergence ----------------------------------------------------

@dataclass
class ConvergenceRow:
    dt: float
    error_l2: float
    error_h1_summed: float
    rate: Optional[float] = None
    rate_h1: Optional[float] = None
    below_floor: bool = False


@dataclass
class ConvergenceTable:
    rows: List[ConvergenceRow] = field(default_factory=list)
    reference: str = "richardson"

    def __post_init__(self):
        dts = [r.dt for r in self.rows]
        for a, b in zip(dts, dts[1:]):
            if not math.isclose(a, 2 * b, rel_tol=1e-9):
                raise ValueError("dt column must halve from row to row")

    @property
    def finest_rate(self):
        return self.rows[-1].rate if self.rows else None

    @property
    def floor_flag(self):
        return any(r.below_floor for r in self.rows)

    def to_csv(self, path_or_file):
        own = isinstance(path_or_file, str)
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(["dt", "error_l2", "error_h1_summed", "rate"])
            for r in self.rows:
                w.writerow([f"{r.dt:.17g}", f"{r.error_l2:.17g}", f"{r.error_h1_summed:.17g}",
                            "" if r.rate is None else f"{r.rate:.17g}"])
        finally:
            if own:
                fh.close()

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            data = list(csv.DictReader(fh))
        rows = [ConvergenceRow(float(d["dt"]), float(d["error_l2"]), float(d["error_h1_summed"]),
                               float(d["rate"]) if d["rate"] else None) for d in data]
        return cls(_with_rates(rows))


def _rate(coarse, fine):
    if coarse < NOISE_FLOOR or fine < NOISE_FLOOR:
        return None
    return math.log2(coarse / fine)


def _with_rates(rows):
    for prev, r in zip(rows, rows[1:]):
        r.rate = _rate(prev.error_l2, r.error_l2)
        r.rate_h1 = _rate(prev.error_h1_summed, r.error_h1_summed)
    for r in rows:
        r.below_floor = r.error_l2 < NOISE_FLOOR or r.error_h1_summed < NOISE_FLOOR
    return rows


def _run(problem, dt, n_steps, variant, order, coarse_degree):
    cfg = SchemeConfig(mu=problem.mu, mu_T=problem.mu_T, dt=dt, variant=variant,
                       n_steps=n_steps, quadrature_order=order, coarse_degree=coarse_degree)
    traj = run_simulation(cfg, problem.mesh, problem.motion, problem.ustar, problem.f,
                          problem.u0, problem.boundary)
    return traj.coefficients()


def temporal_convergence(problem, dts, reference="richardson", ref_factor=4,
                         variant=ENDPOINT, order=4, coarse_degree=0):
    """Observed temporal order of the scheme on ``problem`` against a fine-step reference.

    ``reference="plain"`` compares with the run at dt_min/ref_factor.
    ``reference="richardson"`` uses 2 u(h) - u(2h) with h = dt_min/(2 ref_factor),
    which removes the reference's own first-order error from the comparison.
    """
    dts = [float(d) for d in dts]
    if len(dts) < 3:
        raise ValueError("temporal convergence needs at least 3 dt values")
    for a, b in zip(dts, dts[1:]):
        if not math.isclose(a, 2 * b, rel_tol=1e-9):
            raise ValueError("dt values must halve from one to the next")
    T = problem.final_time
    steps = [int(round(T / d)) for d in dts]
    if any(not math.isclose(s * d, T, rel_tol=1e-9) for s, d in zip(steps, dts)):
        raise ValueError("every dt must divide the final time")

    run = lambda dt, n: _run(problem, dt, n, variant, order, coarse_degree)  # noqa: E731
    h_ref = dts[-1] / ref_factor
    n_ref = steps[-1] * ref_factor
    if reference == "plain":
        ref = run(h_ref, n_ref)
        ref_stride = ref_factor
    elif reference == "richardson":
        coarse = run(h_ref, n_ref)
        fine = run(h_ref / 2, 2 * n_ref)
        ref = 2 * fine[::2] - coarse
        ref_stride = ref_factor
    else:
        raise ValueError(f"unknown reference {reference!r}")

    V, _ = taylor_hood(problem.mesh)
    gmap = build_discrete_map(problem.mesh, problem.motion, uniform_grid(dts[-1], steps[-1]))
    A_at, M_T = {}, None
    for i in range(steps[-1] + 1):
        A_at[i] = stiffness_matrix(V, geometry(gmap, gmap.time_grid[i], order))
    M_T = mass_matrix(V, geometry(gmap, T, order))

    rows = []
    finest = steps[-1]
    for dt, n in zip(dts, steps):
        u = run(dt, n)
        stride = finest // n
        e_T = u[-1] - ref[-1]
        l2 = math.sqrt(max(float(e_T @ M_T @ e_T), 0.0))
        h1 = 0.0
        for i in range(1, n + 1):
            e = u[i] - ref[i * stride * ref_stride]
            h1 += float(e @ A_at[i * stride] @ e)
        rows.append(ConvergenceRow(dt, l2, math.sqrt(max(dt * h1, 0.0))))
    return ConvergenceTable(_with_rates(rows), reference)


__all__ = [
    "time_moment", "gronwall_envelope", "EnergyLedger", "StabilityCertificate",
    "certify_gcl_stability", "certify_nogcl_stability", "gcl_stability_terms",
    "nogcl_stability_terms", "nogcl_ratio", "calibrate_c_prime", "DtCondition",
    "dt_admissible", "map_dt_condition", "sample_basis_pairs", "max_gcl_residual", "h_minus1_surrogate", "ConvergenceRow",
    "ConvergenceTable", "temporal_convergence", "NOISE_FLOOR",
]
