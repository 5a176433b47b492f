"""Analytic vector/scalar fields in Eulerian coordinates."""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class AnalyticField:
    """Field given by ``value(t, x)``; ``x`` has trailing axis of length 2.

    ``grad(t, x)[..., i, j]`` is d value_i / d x_j. When no gradient is
    supplied it is estimated by central differences.
    """

    value: Callable
    grad: Optional[Callable] = None
    name: str = ""

    def __call__(self, t, x):
        return self.value(t, x)

    def gradient(self, t, x, h=1e-6):
        if self.grad is not None:
            return self.grad(t, x)
        x = np.asarray(x, dtype=float)
        cols = []
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            cols.append((self.value(t, x + e) - self.value(t, x - e)) / (2 * h))
        return np.stack(cols, axis=-1)

    def divergence(self, t, x):
        g = self.gradient(t, x)
        return g[..., 0, 0] + g[..., 1, 1]

    def at(self, t):
        return lambda x: self.value(t, x)


def zero_vector():
    return AnalyticField(
        lambda t, x: np.zeros(np.shape(x)[:-1] + (2,)),
        lambda t, x: np.zeros(np.shape(x)[:-1] + (2, 2)),
        name="zero",
    )


def constant_vector(c):
    c = np.asarray(c, dtype=float)
    return AnalyticField(
        lambda t, x: np.broadcast_to(c, np.shape(x)[:-1] + (2,)).copy(),
        lambda t, x: np.zeros(np.shape(x)[:-1] + (2, 2)),
        name=f"constant{tuple(c)}",
    )


def from_sympy(exprs, name=""):
    """Build a vector AnalyticField from sympy expressions in (t, x1, x2)."""
    import sympy as sp

    t, x1, x2 = sp.symbols("t x1 x2")
    exprs = [sp.sympify(e) for e in exprs]
    val = sp.lambdify((t, x1, x2), exprs, "numpy")
    grd = sp.lambdify(
        (t, x1, x2), [[sp.diff(e, v) for v in (x1, x2)] for e in exprs], "numpy"
    )

    def value(tt, x):
        x = np.asarray(x, dtype=float)
        out = val(tt, x[..., 0], x[..., 1])
        return np.stack([np.broadcast_to(o, x.shape[:-1]) for o in out], axis=-1)

    def grad(tt, x):
        x = np.asarray(x, dtype=float)
        out = grd(tt, x[..., 0], x[..., 1])
        rows = [
            np.stack([np.broadcast_to(o, x.shape[:-1]) for o in row], axis=-1)
            for row in out
        ]
        return np.stack(rows, axis=-2)

    return AnalyticField(value, grad, name=name)
