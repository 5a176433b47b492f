"""Quadrature on the reference triangle and on time intervals.

The reference triangle has vertices (0,0), (1,0), (0,1); rule weights sum to
its area 1/2. Points are stored in barycentric form (l0, l1, l2) with
(xi, eta) = (l1, l2).
"""
from dataclasses import dataclass
from math import ceil

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 3) barycentric
    weights: np.ndarray  # (nq,)
    order: int

    @property
    def xi(self):
        return self.points[:, 1:]

    def __len__(self):
        return len(self.weights)


def _orbit(a, b, c):
    return [(a, b, c), (b, c, a), (c, a, b)]


def _symmetric(groups):
    pts, wts = [], []
    for kind, vals, w in groups:
        if kind == "centroid":
            pts.append((1 / 3, 1 / 3, 1 / 3))
            wts.append(w)
        else:
            a = vals
            for p in _orbit(1 - 2 * a, a, a):
                pts.append(p)
                wts.append(w)
    return np.array(pts), 0.5 * np.array(wts)


# Dunavant rules, weights normalised to sum 1 before the 1/2 area factor.
_DUNAVANT = {
    1: [("centroid", None, 1.0)],
    2: [("orbit", 1 / 6, 1 / 3)],
    4: [
        ("orbit", 0.445948490915965, 0.223381589678011),
        ("orbit", 0.091576213509771, 0.109951743655322),
    ],
    5: [
        ("centroid", None, 0.225),
        ("orbit", 0.470142064105115, 0.132394152788506),
        ("orbit", 0.101286507323456, 0.125939180544827),
    ],
}


def _collapsed_gauss(order):
    # Duffy transform of a tensor Gauss-Legendre rule; exact for total degree `order`.
    n = max(1, ceil((order + 2) / 2))
    x, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (x + 1.0)
    ws = 0.5 * w
    S, R = np.meshgrid(s, s, indexing="ij")
    WS, WR = np.meshgrid(ws, ws, indexing="ij")
    xi = S.ravel()
    eta = (R * (1.0 - S)).ravel()
    wts = (WS * WR * (1.0 - S)).ravel()
    pts = np.column_stack([1.0 - xi - eta, xi, eta])
    return pts, wts


def triangle_rule(order=4):
    """Quadrature rule exact for polynomials of total degree ``order``."""
    if order < 0:
        raise ValueError("order must be non-negative")
    for k in sorted(_DUNAVANT):
        if k >= max(order, 1):
            pts, wts = _symmetric(_DUNAVANT[k])
            return QuadratureRule(pts, wts, k)
    pts, wts = _collapsed_gauss(order)
    return QuadratureRule(pts, wts, order)


@dataclass(frozen=True)
class TimeRule:
    """Rule on [0, 1]; nodes are fractions of the interval, weights sum to 1."""

    name: str
    nodes: np.ndarray
    weights: np.ndarray


def time_rule(name="midpoint"):
    if name == "midpoint":
        return TimeRule(name, np.array([0.5]), np.array([1.0]))
    if name in ("left", "left-endpoint"):
        return TimeRule("left", np.array([0.0]), np.array([1.0]))
    if name in ("right", "endpoint", "right-endpoint"):
        return TimeRule("right", np.array([1.0]), np.array([1.0]))
    if name.startswith("gauss"):
        n = int(name[5:] or 5)
        x, w = np.polynomial.legendre.leggauss(n)
        return TimeRule(name, 0.5 * (x + 1.0), 0.5 * w)
    raise ValueError(f"unknown time rule {name!r}")
