"""Experiment configuration: INI files read with configparser.

Schema (every section optional except where noted)::

    [mesh]         nx, ny                        (>= 2)
    [motion]       name = <registry name>; any other key is a motion parameter
    [scheme]       mu (required), mu_T, dt, variant, n_steps, solver_tolerance,
                   quadrature_order, coarse_degree
    [problem]      name = zero | decay | forced | steady | manufactured; final_time
    [constants]    C_omega, C_prime, C
    [gcl]          time_rule, samples, tolerance
    [convergence]  dts (comma list), reference = richardson | plain, ref_factor
    [sweep]        motions, mu, mu_T, problems, variants (comma lists)
    [output]       dir
"""
import configparser
import itertools
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from .errors import ConfigError
from .mesh_motion import MOTIONS, make_motion
from .problems import PROBLEMS, make_problem
from .timestepper import SchemeConfig


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: SchemeConfig
    nx: int = 8
    ny: int = 8
    motion: str = "stationary"
    motion_params: Tuple[Tuple[str, float], ...] = ()
    problem: str = "decay"
    final_time: Optional[float] = None
    C_omega: float = 1.0
    C_prime: float = 1.5
    C: float = 1.0
    time_rule: str = "midpoint"
    gcl_samples: int = 50
    gcl_tolerance: float = 1e-12
    dts: Tuple[float, ...] = ()
    reference: str = "richardson"
    ref_factor: int = 4
    sweep: Dict[str, List] = field(default_factory=dict, compare=False)
    out_dir: str = "out"
    name: str = "run"

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ConfigError("nx and ny must be at least 2")
        if self.motion not in MOTIONS:
            raise ConfigError(f"unknown motion {self.motion!r}; known: {sorted(MOTIONS)}")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; known: {PROBLEMS}")
        if self.reference not in ("richardson", "plain"):
            raise ConfigError("reference must be 'richardson' or 'plain'")
        for k in ("C_omega", "C_prime", "C"):
            if not getattr(self, k) > 0:
                raise ConfigError(f"{k} must be positive")

    @property
    def horizon(self):
        return self.final_time if self.final_time is not None else self.scheme.dt * self.scheme.n_steps

    def make_motion(self):
        try:
            return make_motion(self.motion, **dict(self.motion_params))
        except TypeError as exc:
            raise ConfigError(f"bad parameters for motion {self.motion!r}: {exc}") from None

    def make_problem(self):
        s = self.scheme
        return make_problem(self.problem, mu=s.mu, mu_T=s.mu_T, nx=self.nx, ny=self.ny,
                            motion=self.make_motion(), final_time=self.horizon)

    def expand(self):
        """One config per sweep combination (itself when there is no sweep)."""
        if not self.sweep:
            return [self]
        keys = ("motions", "mu", "mu_T", "problems", "variants")
        axes = [self.sweep.get(k) or [None] for k in keys]
        runs = []
        for motion, mu, mu_T, problem, variant in itertools.product(*axes):
            scheme = replace(self.scheme,
                             mu=self.scheme.mu if mu is None else mu,
                             mu_T=self.scheme.mu_T if mu_T is None else mu_T,
                             variant=variant or self.scheme.variant)
            cfg = replace(self, scheme=scheme, motion=motion or self.motion,
                          motion_params=() if motion and motion != self.motion else self.motion_params,
                          problem=problem or self.problem, sweep={})
            tag = f"{cfg.motion}_mu{scheme.mu:g}_muT{scheme.mu_T:g}_{cfg.problem}_{scheme.variant}"
            runs.append(replace(cfg, name=tag))
        return runs


def _floats(text):
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _words(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def load_config(path):
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return _build(cp, path)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config {path}: {exc}") from None


def _build(cp, path):
    get = lambda sec, key, conv=str, default=None: (  # noqa: E731
        conv(cp[sec][key]) if cp.has_option(sec, key) else default)
    if not cp.has_option("scheme", "mu"):
        raise ConfigError("[scheme] mu is required")
    scheme = SchemeConfig(
        mu=get("scheme", "mu", float),
        mu_T=get("scheme", "mu_T", float, 0.0),
        dt=get("scheme", "dt", float, 0.1),
        variant=get("scheme", "variant", str, "gcl"),
        n_steps=get("scheme", "n_steps", int, 10),
        solver_tolerance=get("scheme", "solver_tolerance", float, 1e-9),
        quadrature_order=get("scheme", "quadrature_order", int, 4),
        coarse_degree=get("scheme", "coarse_degree", int, 0),
    )
    motion_params = ()
    if cp.has_section("motion"):
        motion_params = tuple((k, float(v)) for k, v in cp["motion"].items() if k != "name")
    sweep = {}
    if cp.has_section("sweep"):
        for key in ("motions", "problems", "variants"):
            if cp.has_option("sweep", key):
                sweep[key] = _words(cp["sweep"][key])
        for key in ("mu", "mu_T"):
            if cp.has_option("sweep", key):
                sweep[key] = _floats(cp["sweep"][key])
        for m in sweep.get("motions", []):
            if m not in MOTIONS:
                raise ConfigError(f"unknown motion {m!r} in [sweep]")
        for p in sweep.get("problems", []):
            if p not in PROBLEMS:
                raise ConfigError(f"unknown problem {p!r} in [sweep]")
    return ExperimentConfig(
        scheme=scheme,
        nx=get("mesh", "nx", int, 8),
        ny=get("mesh", "ny", int, 8),
        motion=get("motion", "name", str, "stationary"),
        motion_params=motion_params,
        problem=get("problem", "name", str, "decay"),
        final_time=get("problem", "final_time", float),
        C_omega=get("constants", "C_omega", float, 1.0),
        C_prime=get("constants", "C_prime", float, 1.5),
        C=get("constants", "C", float, 1.0),
        time_rule=get("gcl", "time_rule", str, "midpoint"),
        gcl_samples=get("gcl", "samples", int, 50),
        gcl_tolerance=get("gcl", "tolerance", float, 1e-12),
        dts=tuple(_floats(cp["convergence"]["dts"])) if cp.has_option("convergence", "dts") else (),
        reference=get("convergence", "reference", str, "richardson"),
        ref_factor=get("convergence", "ref_factor", int, 4),
        sweep=sweep,
        out_dir=get("output", "dir", str, "out"),
        name=get("output", "name", str, "run"),
    )
