"""Affine cell maps from the unit triangle to a configuration."""
import numpy as np


def cell_frames(positions, cells):
    """Return (x0, F) with x = x0 + F @ xi on every cell.

    ``F[:, :, 0]`` is the edge v0->v1 and ``F[:, :, 1]`` the edge v0->v2.
    """
    p = positions[cells]
    x0 = p[:, 0, :]
    F = np.stack([p[:, 1, :] - x0, p[:, 2, :] - x0], axis=-1)
    return x0, F


def det2(F):
    return F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]


def inv2(F):
    d = det2(F)
    out = np.empty_like(F)
    out[..., 0, 0] = F[..., 1, 1]
    out[..., 1, 1] = F[..., 0, 0]
    out[..., 0, 1] = -F[..., 0, 1]
    out[..., 1, 0] = -F[..., 1, 0]
    return out / d[..., None, None]


def row_sum_norm(A):
    """Max absolute row sum of the trailing 2x2 block (operator inf-norm)."""
    return np.abs(A).sum(axis=-1).max(axis=-1)
