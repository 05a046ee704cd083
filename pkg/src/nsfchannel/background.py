"""Reference channel state and boundary lifting.

The reference configuration is the unit axial flow ``v = (1, 0)`` with unit
density.  Its temperature profile ``theta_bar`` splits into a Neumann part
``theta0`` (driven by the boundary heat flux ``g``, pinned to mean ``T0``)
and a Robin correction ``theta1`` (driven by the exchange datum ``T1`` and
the axial drift of ``theta0``).  Whatever normal velocity the boundary
datum prescribes beyond the unit flow is removed by a curl-free lift
``u0 = grad phi``.

Sign caveat, deliberately preserved: the volume source of the Neumann part
is the *positive* boundary mean ``c_g`` of the heat flux, which makes the
Neumann data incompatible by ``2 c_g |Omega|``.  The compatibility
projection shifts the source (to ``-c_g``) and both the defect and the
shift are reported on the results; downstream assembly works with the
measured discrete residual of the reduced energy balance instead of
assuming it vanishes, so the reconstructed physical solution does not
inherit the discrepancy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .constitutive import FlowParams, GasModel
from .data import ProblemData
from .elliptic import NeumannResult, solve_neumann_poisson, solve_robin_scalar
from .grid import Grid, diff, gradient, laplacian

__all__ = [
    "Background",
    "Lift",
    "axial_flow",
    "background_energy_residual",
    "build_background",
    "build_lift",
    "compute_cg",
    "solve_theta0",
    "solve_theta1",
]


def axial_flow(grid: Grid) -> np.ndarray:
    """The unit streamwise reference velocity as a stacked field."""
    v = np.zeros((grid.dim, *grid.shape))
    v[0] = 1.0
    return v


def compute_cg(grid: Grid, g: dict[str, np.ndarray] | None) -> float:
    """Boundary integral of a per-face datum divided by the volume.

    Faces missing from ``g`` contribute nothing.  The same average serves
    as the volume source of the gradient lift (there the datum is the
    normal-velocity defect instead of the heat flux).
    """
    if not g:
        return 0.0
    total = 0.0
    for face in grid.faces:
        values = g.get(face.name)
        if values is not None:
            total += grid.integrate_face(face, np.asarray(values, dtype=float))
    return total / grid.channel.volume


def solve_theta0(grid: Grid, g: dict[str, np.ndarray] | None, *,
                 kappa: float, T0: float) -> NeumannResult:
    """Neumann part of the reference temperature.

    Solves ``-kappa Lap t = c_g`` with ``kappa dt/dn = g`` and mean
    ``T0``.  With the plus-sign source the data are incompatible by
    ``2 c_g |Omega|``; the projection inside the Neumann solver absorbs
    the mismatch and the returned ``defect``/``multiplier`` expose it.
    """
    c_g = compute_cg(grid, g)
    rhs = np.full(grid.shape, c_g)
    flux = {name: np.asarray(values, dtype=float)
            for name, values in (g or {}).items()}
    return solve_neumann_poisson(grid, rhs, flux, kappa=kappa, mean=T0)


def _boundary_l2(grid: Grid, data: dict[str, np.ndarray] | None) -> float:
    if not data:
        return 0.0
    total = 0.0
    for face in grid.faces:
        values = data.get(face.name)
        if values is not None:
            values = np.asarray(values, dtype=float)
            total += grid.integrate_face(face, values ** 2)
    return float(np.sqrt(total))


def solve_theta1(grid: Grid, theta0: np.ndarray, params: FlowParams,
                 gas: GasModel, *,
                 T1: dict[str, np.ndarray] | None = None,
                 g: dict[str, np.ndarray] | None = None,
                 L: float | dict[str, float] | None = None,
                 warn_factor: float = 10.0) -> np.ndarray:
    """Robin correction of the reference temperature.

    Solves ``r0 dt/dx1 - kappa Lap t = -r0 dtheta0/dx1 - c_g`` with the
    exchange condition ``kappa dt/dn + L (t - (T1 + T0 - theta0)) = 0``.
    ``L`` defaults to the uniform ``params.L``; a dict restricts the
    exchange to selected faces (missing faces get zero weight).  ``g`` is
    only used for the source constant and the size bound below.

    A solution larger than ``warn_factor * (||T1||_L2 + ||g||_L2)`` in the
    first-order norm exceeds what the linear theory allows for large
    conductivity/exchange and triggers a RuntimeWarning rather than an
    error -- small kappa, L are legitimate, just outside the regime.
    """
    if L is None:
        L = params.L
    if not isinstance(L, dict):
        L = {face.name: float(L) for face in grid.faces}
    if all(L.get(face.name, 0.0) == 0.0 for face in grid.faces):
        raise ValueError("heat-exchange weight vanishes on every face; "
                         "the correction problem is singular")

    c_g = compute_cg(grid, g)
    source = -gas.r0 * diff(theta0, 0, grid.h[0]) - c_g

    T0 = gas.T0
    robin_data = {}
    for face in grid.faces:
        weight = L.get(face.name, 0.0)
        if weight == 0.0:
            continue
        trace = theta0[grid.face_slicer(face)]
        wanted = T0 - trace
        if T1 and face.name in T1:
            wanted = wanted + np.asarray(T1[face.name], dtype=float)
        robin_data[face.name] = weight * wanted

    theta1 = solve_robin_scalar(grid, source, robin_data,
                                kappa=params.kappa, L=L, convection=gas.r0)

    bound = _boundary_l2(grid, T1) + _boundary_l2(grid, g)
    if bound > 0.0:
        from .norms import w1p_norm
        size = w1p_norm(theta1, grid, 2.0)
        if size > warn_factor * bound:
            warnings.warn(
                f"temperature correction size {size:.3e} exceeds "
                f"{warn_factor:g} x data size {bound:.3e}; kappa/L likely "
                "too small for the large-conductivity estimate",
                RuntimeWarning, stacklevel=2)
    return theta1


def background_energy_residual(grid: Grid, theta: np.ndarray, *,
                               kappa: float, r0: float) -> np.ndarray:
    """Discrete residual ``r0 dtheta/dx1 - kappa Lap theta``.

    For the assembled reference temperature this is a constant close to
    ``-2 c_g`` at interior nodes (see the module docstring) and zero up
    to O(h^2) whenever the boundary heat flux has zero mean.
    """
    return r0 * diff(theta, 0, grid.h[0]) - kappa * laplacian(theta, grid)


# ---------------------------------------------------------------------------
# gradient lift of the normal-velocity datum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lift:
    """Curl-free velocity lift ``u0 = grad phi`` of a normal datum."""

    phi: np.ndarray
    u0: np.ndarray
    source_constant: float
    defect: float


def build_lift(grid: Grid, datum: dict[str, np.ndarray] | None) -> Lift:
    """Lift a normal-velocity boundary datum into a curl-free field.

    ``phi`` solves ``Lap phi = c_d`` with ``dphi/dn = datum`` and zero
    mean, where ``c_d`` is the boundary average of the datum; with that
    source the Neumann problem is compatible by construction, so the
    reported defect is quadrature roundoff.
    """
    c_d = compute_cg(grid, datum)
    rhs = np.full(grid.shape, -c_d)  # -Lap phi = -c_d
    flux = {name: np.asarray(values, dtype=float)
            for name, values in (datum or {}).items()}
    res = solve_neumann_poisson(grid, rhs, flux, kappa=1.0, mean=0.0)
    return Lift(phi=res.field, u0=gradient(res.field, grid),
                source_constant=c_d, defect=res.defect)


# ---------------------------------------------------------------------------
# assembled reference state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Background:
    """Reference flow: unit axial velocity, unit density, split temperature.

    ``energy_residual`` stores the measured discrete residual of the
    reduced energy balance on ``theta = theta0 + theta1``; the assembly of
    the perturbation sources subtracts it, so it is kept here rather than
    recomputed downstream.
    """

    theta0: np.ndarray
    theta1: np.ndarray
    c_g: float
    T0: float
    compat_defect: float
    compat_multiplier: float
    lift: Lift
    energy_residual: np.ndarray

    @property
    def theta(self) -> np.ndarray:
        return self.theta0 + self.theta1

    @property
    def u0(self) -> np.ndarray:
        return self.lift.u0


def build_background(grid: Grid, data: ProblemData, params: FlowParams,
                     gas: GasModel) -> Background:
    """Construct the full reference state for a problem data set."""
    res0 = solve_theta0(grid, data.g, kappa=params.kappa, T0=gas.T0)
    theta1 = solve_theta1(grid, res0.field, params, gas,
                          T1=data.T1, g=data.g)
    delta = {face.name: data.normal_defect(grid, face) for face in grid.faces}
    lift = build_lift(grid, delta)
    residual = background_energy_residual(grid, res0.field + theta1,
                                          kappa=params.kappa, r0=gas.r0)
    return Background(theta0=res0.field, theta1=theta1,
                      c_g=compute_cg(grid, data.g), T0=gas.T0,
                      compat_defect=res0.defect,
                      compat_multiplier=res0.multiplier,
                      lift=lift, energy_residual=residual)
