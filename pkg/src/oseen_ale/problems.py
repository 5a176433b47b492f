"""Problem registry: data sets used by the sweeps, the CLI and the tests.

``manufactured`` is the moving-domain convergence problem. Its velocity is
the curl of psi = sin^2(pi x1) sin^2(pi x2) (1 + t/2), the pressure is
sin(2 pi x1) cos(2 pi x2) t, the advecting field is the initial velocity,
and the forcing is derived symbolically from

    f = du/dt + (u* . grad) u - 2 mu Lap u + grad p

which is the strong form of the gradient-gradient viscous term used by the
solver. In Eulerian form the mesh velocity cancels, so f does not depend on
the motion.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .fields import AnalyticField, from_sympy, zero_vector
from .mesh_motion import make_motion, unit_square


@dataclass(eq=False)
class ProblemSpec:
    name: str
    mesh: object
    motion: object
    ustar: AnalyticField
    f: Optional[AnalyticField]
    u0: object  # callable x -> (n, 2), FeField, or None
    boundary: Optional[AnalyticField]
    final_time: float
    mu: float
    mu_T: float = 0.0
    exact: Optional[AnalyticField] = None
    pressure: Optional[Callable] = None


@lru_cache(maxsize=None)
def manufactured_symbols(mu):
    """Sympy expressions (u, p, ustar, f) of the manufactured solution for viscosity ``mu``."""
    import sympy as sp

    t, x1, x2 = sp.symbols("t x1 x2")
    psi = sp.sin(sp.pi * x1) ** 2 * sp.sin(sp.pi * x2) ** 2 * (1 + t / 2)
    u = [sp.diff(psi, x2), -sp.diff(psi, x1)]
    p = sp.sin(2 * sp.pi * x1) * sp.cos(2 * sp.pi * x2) * t
    ustar = [c.subs(t, 0) for c in u]
    mu = sp.nsimplify(mu)
    f = [
        sp.diff(u[i], t)
        + ustar[0] * sp.diff(u[i], x1) + ustar[1] * sp.diff(u[i], x2)
        - 2 * mu * (sp.diff(u[i], x1, 2) + sp.diff(u[i], x2, 2))
        + sp.diff(p, (x1, x2)[i])
        for i in range(2)
    ]
    return u, p, ustar, [sp.simplify(fi) for fi in f]


def stream_bump(scale=1.0):
    """Divergence-free field vanishing on the unit-square boundary."""
    s, c = np.sin, np.cos
    pi = np.pi

    def value(t, x):
        x1, x2 = x[..., 0], x[..., 1]
        u1 = 2 * pi * s(pi * x1) ** 2 * s(pi * x2) * c(pi * x2)
        u2 = -2 * pi * s(pi * x1) * c(pi * x1) * s(pi * x2) ** 2
        return scale * np.stack([u1, u2], axis=-1)

    def grad(t, x):
        x1, x2 = x[..., 0], x[..., 1]
        a = 2 * pi * pi * s(2 * pi * x1) * s(2 * pi * x2) / 2
        b = 2 * pi * pi * s(pi * x1) ** 2 * c(2 * pi * x2)
        d = -2 * pi * pi * c(2 * pi * x1) * s(pi * x2) ** 2
        g = np.empty(x.shape[:-1] + (2, 2))
        g[..., 0, 0] = a
        g[..., 0, 1] = b
        g[..., 1, 0] = d
        g[..., 1, 1] = -a
        return scale * g

    return AnalyticField(value, grad, name="stream-bump")


def forcing_field():
    def value(t, x):
        return (1 + t) * np.stack([np.sin(np.pi * x[..., 1]), np.cos(np.pi * x[..., 0])], axis=-1)

    return AnalyticField(value, name="forcing")


def _manufactured(mu, mu_T, nx, ny, motion, final_time, amplitude=0.1):
    u, p, ustar, f = manufactured_symbols(mu)
    exact = from_sympy(u, "manufactured-u")
    motion = motion or make_motion("smooth-expansion", amplitude=amplitude)
    import sympy as sp

    from .timestepper import SchemeConfig, compatible_start

    pf = sp.lambdify(sp.symbols("t x1 x2"), p, "numpy")
    mesh = unit_square(nx, ny)
    t = sp.Symbol("t")
    dudt = from_sympy([sp.diff(c, t) for c in u], "manufactured-dudt")
    ustar_f = from_sympy(ustar, "ustar")
    f_f = from_sympy(f, "manufactured-f")
    cfg = SchemeConfig(mu=mu, mu_T=mu_T)
    u0 = compatible_start(cfg, mesh, motion, ustar_f, f_f, dudt, exact)
    return ProblemSpec(
        "manufactured", mesh, motion, ustar_f, f_f, u0, exact, final_time, mu, mu_T,
        exact=exact, pressure=lambda t, x: pf(t, x[..., 0], x[..., 1]),
    )


def make_problem(name, mu=0.05, mu_T=0.0, nx=8, ny=8, motion=None, final_time=1.0, **params):
    mesh = unit_square(nx, ny)
    if name == "manufactured":
        return _manufactured(mu, mu_T, nx, ny, motion, final_time, **params)
    motion = motion or make_motion("stationary")
    bump = stream_bump(params.get("scale", 1.0))
    if name == "zero":
        return ProblemSpec(name, mesh, motion, bump, None, None, None, final_time, mu, mu_T)
    if name == "decay":
        return ProblemSpec(name, mesh, motion, bump, None, lambda x: bump(0.0, x), None,
                           final_time, mu, mu_T)
    if name == "forced":
        return ProblemSpec(name, mesh, motion, bump, forcing_field(), lambda x: bump(0.0, x),
                           None, final_time, mu, mu_T)
    if name == "steady":
        from .timestepper import SchemeConfig, steady_state

        steady_f = AnalyticField(lambda t, x: forcing_field()(0.0, x), name="steady-forcing")
        cfg = SchemeConfig(mu=mu, mu_T=mu_T)
        u0 = steady_state(cfg, mesh, bump, steady_f)
        return ProblemSpec(name, mesh, make_motion("stationary"), bump, steady_f, u0, None,
                           final_time, mu, mu_T)
    raise KeyError(f"unknown problem {name!r}; known: {PROBLEMS}")


PROBLEMS = ("zero", "decay", "forced", "steady", "manufactured")

__all__ = ["ProblemSpec", "make_problem", "manufactured_symbols", "stream_bump",
           "forcing_field", "zero_vector", "PROBLEMS"]
