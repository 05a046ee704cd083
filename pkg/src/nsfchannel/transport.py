"""Streamwise transport of the density perturbation.

The continuity block reduces to a transport equation marched in the flow
direction,

    dw/dx1 + a(x) dw/dx2 + gamma w = q,      w(0, .) given,

with a cross-stream drift ``a`` that vanishes on the walls (the flow is
impermeable).  Two independent routes compute it:

* :func:`march_transport` — explicit first-order upwind marching on the
  grid, the production path used inside the iteration;
* :func:`characteristic_oracle` — fourth-order tracing of the
  characteristic curves from the inflow nodes with trapezoid
  accumulation of the source, then per-station interpolation back to the
  nodes.  It shares no stencils with the marching and anchors its
  accuracy tests.

Both refuse to run on drifts that leak through the walls, and the
marching additionally refuses when the slope ``|a| h1/h2`` exceeds one
(the upwind cone would leave the stencil; refining the streamwise
resolution restores the balance).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .grid import Grid

__all__ = [
    "CFLError",
    "WallLeakError",
    "march_transport",
    "transport_from_drift",
    "trace_characteristics",
    "characteristic_oracle",
]

_WALL_TOL = 1e-12


class CFLError(ValueError):
    """The upwind cone of the marching scheme left the grid stencil."""


class WallLeakError(ValueError):
    """The cross-stream drift does not vanish on a wall."""


def _drift_on_nodes(grid: Grid, a) -> np.ndarray:
    if callable(a):
        x1, x2 = grid.coords
        a = a(x1, x2)
    a = np.asarray(a, dtype=float)
    if a.shape != grid.shape:
        raise ValueError(f"drift shape {a.shape} != grid shape {grid.shape}")
    return a


def _check_walls(grid: Grid, a: np.ndarray) -> np.ndarray:
    for j, face in ((0, "bottom"), (-1, "top")):
        worst = int(np.argmax(np.abs(a[:, j])))
        if abs(a[worst, j]) > _WALL_TOL:
            raise WallLeakError(
                f"drift must vanish on the {face} wall: |a| = "
                f"{abs(a[worst, j]):.3e} at x1 = {grid.axes[0][worst]:.6g}"
            )
    a = a.copy()
    a[:, 0] = 0.0
    a[:, -1] = 0.0
    return a


def march_transport(grid: Grid, a, source, inflow: np.ndarray,
                    damping: float = 0.0) -> np.ndarray:
    """March ``dw/dx1 + a dw/dx2 + damping w = source`` from the inflow.

    First order: upwind in the cross-stream direction, forward Euler in
    the streamwise direction.
    """
    if grid.dim != 2:
        raise NotImplementedError("transport marching is implemented for planar grids")
    a = _check_walls(grid, _drift_on_nodes(grid, a))
    source = _drift_on_nodes(grid, source)
    inflow = np.asarray(inflow, dtype=float)
    if inflow.shape != (grid.shape[1],):
        raise ValueError(f"inflow shape {inflow.shape} != {(grid.shape[1],)}")

    h1, h2 = grid.h
    cfl = float(np.max(np.abs(a))) * h1 / h2
    if cfl > 1.0:
        raise CFLError(
            f"upwind slope |a| h1/h2 = {cfl:.3f} exceeds 1; refine the "
            "streamwise resolution (larger n1) or coarsen the cross-stream one"
        )

    ap = np.maximum(a, 0.0)
    am = np.minimum(a, 0.0)
    w = np.empty(grid.shape)
    w[0] = inflow
    for i in range(grid.n[0]):
        wi = w[i]
        dw = (wi[1:] - wi[:-1]) / h2
        flux = np.zeros_like(wi)
        flux[1:] += ap[i, 1:] * dw
        flux[:-1] += am[i, :-1] * dw
        w[i + 1] = wi + h1 * (source[i] - flux - damping * wi)
    return w


def transport_from_drift(grid: Grid, U: np.ndarray, source: np.ndarray,
                         inflow: np.ndarray, damping: float = 0.0) -> np.ndarray:
    """Continuity-block wrapper: solve
    ``(1 + U1) dw/dx1 + U2 dw/dx2 + damping (1+U1) w = source``.

    Refuses drifts that reverse or stall the streamwise flow
    (``1 + U1 < 1/2``), which would invalidate marching altogether.
    """
    U = np.asarray(U, dtype=float)
    denom = 1.0 + U[0]
    if float(np.min(denom)) < 0.5:
        idx = np.unravel_index(int(np.argmin(denom)), grid.shape)
        raise ValueError(
            f"streamwise speed 1 + U1 = {float(denom[idx]):.4g} < 0.5 at node {idx}; "
            "the perturbation left the marching regime"
        )
    return march_transport(grid, U[1] / denom, np.asarray(source) / denom,
                           inflow, damping=damping)


# ---------------------------------------------------------------------------
# characteristic oracle
# ---------------------------------------------------------------------------


def _sampler(grid: Grid, field):
    if callable(field):
        return lambda x, z: np.asarray(field(x, z), dtype=float)
    field = _drift_on_nodes(grid, field)
    interp = RegularGridInterpolator(
        (grid.axes[0], grid.axes[1]), field, method="linear",
        bounds_error=False, fill_value=None,
    )

    def call(x, z):
        pts = np.column_stack([np.full(z.shape, x), z])
        return interp(pts)

    return call


def _validate_wall_drift(grid: Grid, a) -> None:
    xs = grid.axes[0]
    for height, label in ((0.0, "bottom"), (1.0, "top")):
        vals = np.array([a(float(x), np.array([height]))[0] for x in xs])
        worst = int(np.argmax(np.abs(vals)))
        if abs(vals[worst]) > _WALL_TOL:
            raise WallLeakError(
                f"drift must vanish on the {label} wall: |a| = "
                f"{abs(vals[worst]):.3e} at x1 = {xs[worst]:.6g}"
            )


def trace_characteristics(grid: Grid, velocity) -> np.ndarray:
    """Positions of the characteristics launched from the inflow nodes.

    Returns an array of shape ``grid.shape``: entry ``[i, j]`` is the
    cross-stream position, at station ``x1 = i h1``, of the curve that
    started at inflow node ``j``.  Classic RK4 with substeps no longer
    than half the smallest spacing.
    """
    a = _sampler(grid, velocity)
    _validate_wall_drift(grid, a)
    h1 = grid.h[0]
    m = max(1, math.ceil(h1 / (min(grid.h) / 2)))
    dx = h1 / m
    z = grid.axes[1].copy()
    lines = np.empty(grid.shape)
    lines[0] = z
    for i in range(grid.n[0]):
        x0 = grid.axes[0][i]
        for k in range(m):
            x = x0 + k * dx
            k1 = a(x, z)
            k2 = a(x + dx / 2, z + dx / 2 * k1)
            k3 = a(x + dx / 2, z + dx / 2 * k2)
            k4 = a(x + dx, z + dx * k3)
            z = z + dx / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            # wall curves are exact: the drift vanishes there
            z[0], z[-1] = 0.0, 1.0
        lines[i + 1] = z
    return lines


def characteristic_oracle(grid: Grid, velocity, source, inflow: np.ndarray,
                          damping: float = 0.0) -> np.ndarray:
    """Transport solution by characteristic tracing, on the grid nodes.

    Along each curve the source is accumulated with the trapezoid rule
    (Crank–Nicolson for the damping term); each streamwise station is
    then mapped back to the nodes by monotone interpolation across the
    curve crossings.  Raises if curves cross or a node falls outside
    their span.
    """
    a = _sampler(grid, velocity)
    _validate_wall_drift(grid, a)
    q = _sampler(grid, source)
    inflow = np.asarray(inflow, dtype=float)

    h1 = grid.h[0]
    m = max(1, math.ceil(h1 / (min(grid.h) / 2)))
    dx = h1 / m
    z = grid.axes[1].copy()
    w = inflow.copy()
    x2 = grid.axes[1]

    out = np.empty(grid.shape)
    out[0] = inflow
    for i in range(grid.n[0]):
        x0 = grid.axes[0][i]
        for k in range(m):
            x = x0 + k * dx
            q0 = q(x, z)
            k1 = a(x, z)
            k2 = a(x + dx / 2, z + dx / 2 * k1)
            k3 = a(x + dx / 2, z + dx / 2 * k2)
            k4 = a(x + dx, z + dx * k3)
            z = z + dx / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            z[0], z[-1] = 0.0, 1.0
            q1 = q(x + dx, z)
            w = (w * (1 - damping * dx / 2) + dx / 2 * (q0 + q1)) / (1 + damping * dx / 2)
        if np.any(np.diff(z) <= 0):
            bad = int(np.argmin(np.diff(z)))
            raise ValueError(
                f"characteristics crossed near x1 = {grid.axes[0][i + 1]:.6g}, "
                f"between launch nodes {bad} and {bad + 1}"
            )
        if x2[0] < z[0] - 1e-12 or x2[-1] > z[-1] + 1e-12:
            raise ValueError(
                f"nodes at station {i + 1} outside the characteristic span "
                f"[{z[0]:.6g}, {z[-1]:.6g}]"
            )
        out[i + 1] = np.interp(x2, z, w)
    return out
