"""Constitutive closures: pressure/internal-energy laws tied together by
the Maxwell relation, the Newtonian stress, and the handful of reference
coefficients the linearized system is built from.

The internal energy always has unit specific heat in its linear part,
``e = e_pi(rho, theta) + theta``, and the residual part is pinned to the
pressure by ``d(e_pi)/d(rho) = (pi - theta * d(pi)/d(theta)) / rho**2``.
Reference coefficients are evaluated at the constant state
``(rho, theta) = (1, T0)``:

    p1 = d(pi)/d(rho),   p2 = d(pi)/d(theta),
    e1 = d(e_pi)/d(rho), e2 = d(e_pi)/d(theta),

and the energy-equation pair ``r0 = 1 + e2``, ``r1 = T0 * p2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "GasModel",
    "StateBox",
    "StateBoxError",
    "FlowParams",
    "stress",
    "dissipation",
    "velocity_gradient",
    "stress_from_field",
]

Array = np.ndarray
StateFn = Callable[[Array, Array], Array]


class StateBoxError(ValueError):
    """A thermodynamic state left the admissible box."""


@dataclass(frozen=True)
class StateBox:
    """Admissible (density, temperature) rectangle for a gas model.

    Defaults bracket the constant background state ``(1, T0)`` with a
    factor of two each way.
    """

    rho_min: float = 0.5
    rho_max: float = 1.5
    theta_min: float = 0.5
    theta_max: float = 2.0

    @classmethod
    def around(cls, T0: float) -> "StateBox":
        return cls(0.5, 1.5, T0 / 2, 2 * T0)

    def check(self, rho: Array, theta: Array) -> None:
        rho = np.asarray(rho)
        theta = np.asarray(theta)
        bad_rho = (rho < self.rho_min) | (rho > self.rho_max)
        bad_theta = (theta < self.theta_min) | (theta > self.theta_max)
        if np.any(bad_rho):
            idx = tuple(int(k[0]) for k in np.nonzero(bad_rho))
            raise StateBoxError(
                f"density {float(np.asarray(rho)[idx]):.6g} at node {idx} outside "
                f"[{self.rho_min}, {self.rho_max}]"
            )
        if np.any(bad_theta):
            idx = tuple(int(k[0]) for k in np.nonzero(bad_theta))
            raise StateBoxError(
                f"temperature {float(np.asarray(theta)[idx]):.6g} at node {idx} "
                f"outside [{self.theta_min}, {self.theta_max}]"
            )


@dataclass(frozen=True)
class GasModel:
    """A pressure law with its Maxwell-consistent internal energy.

    All six callables are vectorized over node arrays.  Use
    :meth:`ideal` for the default law, or :meth:`from_expressions` to
    build a nonideal model from symbolic formulas (the Maxwell relation
    is then checked symbolically before anything is lambdified).
    """

    p0: float
    T0: float
    pi: StateFn
    pi_rho: StateFn
    pi_theta: StateFn
    e_pi: StateFn
    e_pi_rho: StateFn
    e_pi_theta: StateFn
    name: str = "gas"
    box: StateBox = field(default_factory=StateBox)

    # -- reference coefficients -------------------------------------------

    @property
    def p1(self) -> float:
        return float(self.pi_rho(np.float64(1.0), np.float64(self.T0)))

    @property
    def p2(self) -> float:
        return float(self.pi_theta(np.float64(1.0), np.float64(self.T0)))

    @property
    def e1(self) -> float:
        return float(self.e_pi_rho(np.float64(1.0), np.float64(self.T0)))

    @property
    def e2(self) -> float:
        return float(self.e_pi_theta(np.float64(1.0), np.float64(self.T0)))

    @property
    def r0(self) -> float:
        return 1.0 + self.e2

    @property
    def r1(self) -> float:
        return self.T0 * self.p2

    def gamma(self, mu: float, lam: float) -> float:
        """Contraction number of the grad-div block, ``p1 / (lam + 4 mu / 3)``."""
        return self.p1 / (lam + 4 * mu / 3)

    # -- derived state functions -------------------------------------------

    def energy(self, rho: Array, theta: Array) -> Array:
        return self.e_pi(rho, theta) + theta

    def energy_theta(self, rho: Array, theta: Array) -> Array:
        return 1.0 + self.e_pi_theta(rho, theta)

    def energy_rho(self, rho: Array, theta: Array) -> Array:
        return self.e_pi_rho(rho, theta)

    def maxwell_residual(self, rho: Array, theta: Array) -> Array:
        """Pointwise defect of the compatibility relation (zero for a
        well-formed model)."""
        return self.e_pi_rho(rho, theta) - (
            self.pi(rho, theta) - theta * self.pi_theta(rho, theta)
        ) / rho**2

    def check_state(self, rho: Array, theta: Array) -> None:
        self.box.check(rho, theta)

    # -- constructors --------------------------------------------------------

    @classmethod
    def ideal(cls, p0: float = 1.0, T0: float = 1.0) -> "GasModel":
        """``pi = p0 rho theta / T0`` with vanishing residual energy."""
        if p0 <= 0 or T0 <= 0:
            raise ValueError(f"p0 and T0 must be positive, got p0={p0}, T0={T0}")
        c = p0 / T0
        return cls(
            p0=p0,
            T0=T0,
            pi=lambda rho, theta: c * rho * theta,
            pi_rho=lambda rho, theta: c * theta + 0.0 * rho,
            pi_theta=lambda rho, theta: c * rho + 0.0 * theta,
            e_pi=lambda rho, theta: 0.0 * rho,
            e_pi_rho=lambda rho, theta: 0.0 * rho,
            e_pi_theta=lambda rho, theta: 0.0 * rho,
            name=f"ideal(p0={p0}, T0={T0})",
            box=StateBox.around(T0),
        )

    @classmethod
    def from_expressions(cls, pi_expr, e_pi_expr, p0: float, T0: float,
                         name: str = "custom") -> "GasModel":
        """Build a model from sympy expressions in symbols ``rho, theta``.

        Raises ``ValueError`` if the pair violates the Maxwell relation.
        """
        import sympy as sym

        rho, theta = sym.symbols("rho theta", positive=True)
        names = {"rho": rho, "theta": theta}
        pi_expr = sym.sympify(pi_expr, locals=names)
        e_pi_expr = sym.sympify(e_pi_expr, locals=names)
        defect = sym.simplify(
            sym.diff(e_pi_expr, rho)
            - (pi_expr - theta * sym.diff(pi_expr, theta)) / rho**2
        )
        if defect != 0:
            raise ValueError(f"pressure/energy pair violates the Maxwell relation: {defect}")

        def lam(expr):
            return sym.lambdify((rho, theta), expr, modules="numpy")

        return cls(
            p0=p0,
            T0=T0,
            pi=lam(pi_expr),
            pi_rho=lam(sym.diff(pi_expr, rho)),
            pi_theta=lam(sym.diff(pi_expr, theta)),
            e_pi=lam(e_pi_expr),
            e_pi_rho=lam(sym.diff(e_pi_expr, rho)),
            e_pi_theta=lam(sym.diff(e_pi_expr, theta)),
            name=name,
            box=StateBox.around(T0),
        )

    @classmethod
    def theta_corrected(cls, p0: float = 1.0, T0: float = 1.0, b: float = 0.1) -> "GasModel":
        """Ideal law plus ``b (theta - T0)^2 rho^2``; exercises nonzero e2
        (equal to ``-2 b T0``) without leaving the Maxwell family."""
        pi = f"{p0}/{T0} * rho * theta + {b} * (theta - {T0})**2 * rho**2"
        e_pi = f"-{b} * rho * (theta**2 - {T0}**2)"
        return cls.from_expressions(pi, e_pi, p0=p0, T0=T0, name=f"theta_corrected(b={b})")


@dataclass(frozen=True)
class FlowParams:
    """Transport coefficients and boundary-condition weights."""

    mu: float = 1.0
    lam: float = 0.0
    alpha: float = 1.0
    kappa: float = 1.0
    L: float = 1.0

    def __post_init__(self) -> None:
        if self.mu <= 0:
            raise ValueError(f"shear viscosity must be positive, got {self.mu}")
        if self.lam < 0:
            raise ValueError(f"second viscosity must be nonnegative, got {self.lam}")
        if self.alpha <= 0:
            raise ValueError(f"wall friction must be positive, got {self.alpha}")
        if self.kappa <= 0:
            raise ValueError(f"heat conductivity must be positive, got {self.kappa}")
        if self.L < 0:
            raise ValueError(f"heat-exchange weight must be nonnegative, got {self.L}")

    @property
    def grad_div_momentum(self) -> float:
        """Coefficient of grad(div u) inside div S(grad u)."""
        return self.lam + self.mu / 3

    @property
    def grad_div_lame(self) -> float:
        """Coefficient of grad(div u) in the plain elasticity operator
        ``-mu Lap u - lam grad div u``."""
        return self.lam


# -- Newtonian stress --------------------------------------------------------


def stress(grad_v: Array, mu: float, lam: float) -> Array:
    """Viscous stress from a velocity gradient.

    ``grad_v[i, j]`` holds the derivative of component ``i`` along axis
    ``j`` (trailing axes are node axes).  The deviatoric weight keeps the
    three-dimensional ``2/3`` in every dimension, so in the plane the
    stress is not trace-free:

        S = mu (grad v + grad v^T - (2/3) div v I) + lam div v I.
    """
    grad_v = np.asarray(grad_v, dtype=float)
    d = grad_v.shape[0]
    if grad_v.shape[1] != d:
        raise ValueError(f"velocity gradient must be square, got {grad_v.shape[:2]}")
    div = np.trace(grad_v, axis1=0, axis2=1)
    s = mu * (grad_v + np.swapaxes(grad_v, 0, 1))
    iso = (lam - 2 * mu / 3) * div
    for i in range(d):
        s[i, i] += iso
    return s


def dissipation(grad_v: Array, mu: float, lam: float) -> Array:
    """Pointwise ``S(grad v) : grad v`` (nonnegative for mu > 0, lam >= 0)."""
    return np.sum(stress(grad_v, mu, lam) * np.asarray(grad_v, dtype=float), axis=(0, 1))


def velocity_gradient(v: Array, grid) -> Array:
    """Gradient tensor of a stacked vector field, shape (d, d) + grid.shape."""
    from .grid import diff

    d = grid.dim
    return np.stack(
        [np.stack([diff(v[i], a, grid.h[a]) for a in range(d)]) for i in range(d)]
    )


def stress_from_field(v: Array, grid, mu: float, lam: float) -> Array:
    return stress(velocity_gradient(v, grid), mu, lam)
