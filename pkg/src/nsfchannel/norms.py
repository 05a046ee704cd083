"""Discrete Lebesgue/Sobolev norms on grid fields and boundary traces.

All integrals are the grid's trapezoid rule; derivatives are the
second-order one-sided/centered stencils from :mod:`nsfchannel.grid`.
Vector (or tensor) fields are measured through their pointwise Euclidean
magnitude, so every norm reduces to a scalar ``L^p`` call.
"""

from __future__ import annotations

import numpy as np

from .grid import Face, Grid, diff

__all__ = [
    "lp_norm",
    "grad_norm",
    "w1p_norm",
    "w2p_norm",
    "sup_slice_norm",
    "trace_lp",
    "trace_norm",
]


def _magnitude(field: np.ndarray, node_ndim: int) -> np.ndarray:
    """Euclidean magnitude over any leading (component) axes."""
    field = np.asarray(field, dtype=float)
    extra = field.ndim - node_ndim
    if extra == 0:
        return np.abs(field)
    comp_axes = tuple(range(extra))
    return np.sqrt(np.sum(field**2, axis=comp_axes))


def lp_norm(field: np.ndarray, grid: Grid, p: float) -> float:
    """``L^p`` norm over the channel; ``p = inf`` gives the max norm."""
    mag = _magnitude(field, grid.dim)
    if np.isinf(p):
        return float(np.max(mag))
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float(np.sum(grid.volume_weights * mag**p) ** (1.0 / p))


def _gradient_stack(field: np.ndarray, grid: Grid) -> np.ndarray:
    """Stack of first derivatives for scalar or component-stacked fields."""
    field = np.asarray(field, dtype=float)
    parts = [diff(field, field.ndim - grid.dim + a, grid.h[a]) for a in range(grid.dim)]
    return np.stack(parts)


def grad_norm(field: np.ndarray, grid: Grid, p: float) -> float:
    return lp_norm(_gradient_stack(field, grid), grid, p)


def w1p_norm(field: np.ndarray, grid: Grid, p: float) -> float:
    """``||f||_p + ||grad f||_p`` (components stacked for vectors)."""
    return lp_norm(field, grid, p) + grad_norm(field, grid, p)


def w2p_norm(field: np.ndarray, grid: Grid, p: float) -> float:
    """First-order norm plus the full second-derivative stack."""
    g = _gradient_stack(field, grid)
    h = _gradient_stack(g, grid)
    return w1p_norm(field, grid, p) + lp_norm(h, grid, p)


def sup_slice_norm(field: np.ndarray, grid: Grid) -> float:
    """Sup over streamwise stations of the transverse ``L^2`` norm.

    This is the natural size of transported quantities: bounded slice by
    slice, with no streamwise derivative available.
    """
    mag = _magnitude(field, grid.dim)
    w = grid.axis_weights[1]
    for a in range(2, grid.dim):
        w = np.multiply.outer(w, grid.axis_weights[a])
    transverse = tuple(range(1, grid.dim))
    slice_norms = np.sqrt(np.sum(w * mag**2, axis=transverse))
    return float(np.max(slice_norms))


def trace_lp(values: np.ndarray, grid: Grid, face: Face | str, p: float) -> float:
    f = grid.face(face) if isinstance(face, str) else face
    mag = _magnitude(values, grid.dim - 1)
    if np.isinf(p):
        return float(np.max(mag))
    return float(np.sum(grid.face_weights(f) * mag**p) ** (1.0 / p))


def trace_norm(values: np.ndarray, grid: Grid, face: Face | str, p: float) -> float:
    """Boundary ``L^p`` plus the tangential first-derivative ``L^p``.

    The derivative part is the discrete stand-in for the fractional trace
    regularity the data must carry.
    """
    f = grid.face(face) if isinstance(face, str) else face
    values = np.asarray(values, dtype=float)
    tang_axes = [a for a in range(grid.dim) if a != f.axis]
    node_ndim = grid.dim - 1
    comp = values.ndim - node_ndim
    parts = []
    for k, a in enumerate(tang_axes):
        parts.append(diff(values, comp + k, grid.h[a]))
    deriv = np.stack(parts)
    return trace_lp(values, grid, f, p) + trace_lp(deriv, grid, f, p)
