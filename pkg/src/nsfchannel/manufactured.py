"""Closed-form problems for order-of-accuracy checks.

Everything here is generated symbolically and lambdified, so the
reference data never touches the finite-difference code it is used to
judge.  Cases bundle an exact solution with the volume and boundary data
that make it solve the corresponding operator on a channel of a given
length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sym

from .constitutive import FlowParams, GasModel
from .grid import Grid

__all__ = [
    "X1",
    "X2",
    "ScalarCase",
    "VectorCase",
    "LinearStepCase",
    "fit_order",
]

X1, X2 = sym.symbols("x1 x2", real=True)

_NORMALS = {"in": (-1, 0), "out": (1, 0), "bottom": (0, -1), "top": (0, 1)}


def _ev(expr):
    fn = sym.lambdify((X1, X2), expr, modules="numpy")

    def call(xa, ya):
        out = np.asarray(fn(xa, ya), dtype=float)
        return np.broadcast_to(out, np.broadcast(xa, ya).shape).copy()

    return call


def _on_grid(expr, grid: Grid) -> np.ndarray:
    x1, x2 = grid.coords
    return _ev(expr)(x1, x2)


def _on_face(expr, grid: Grid, face: str) -> np.ndarray:
    x1, x2 = grid.face_coords(face)
    return _ev(expr)(x1, x2)


def fit_order(h_values, errors) -> float:
    """Least-squares slope of log(error) against log(h)."""
    h = np.log(np.asarray(h_values, dtype=float))
    e = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(h, e, 1)[0])


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarCase:
    """Manufactured data for ``c0 w + c1 dw/dx1 - kappa Lap w`` with Robin
    faces ``kappa dw/dn + L w = r``.  With all ``L`` zero the same case
    doubles as a pure-Neumann problem, exposing the flux data and the
    exact mean."""

    expr: sym.Expr
    length: float
    kappa: float = 1.0
    L: dict[str, float] = field(default_factory=dict)
    convection: float = 0.0
    c0: float = 0.0

    def exact(self, grid: Grid) -> np.ndarray:
        return _on_grid(self.expr, grid)

    def volume_rhs(self, grid: Grid) -> np.ndarray:
        e = self.expr
        rhs = (
            self.c0 * e
            + self.convection * sym.diff(e, X1)
            - self.kappa * (sym.diff(e, X1, 2) + sym.diff(e, X2, 2))
        )
        return _on_grid(rhs, grid)

    def _normal_derivative(self, face: str) -> sym.Expr:
        n1, n2 = _NORMALS[face]
        return n1 * sym.diff(self.expr, X1) + n2 * sym.diff(self.expr, X2)

    def robin_data(self, grid: Grid) -> dict[str, np.ndarray]:
        out = {}
        for face in _NORMALS:
            r = self.kappa * self._normal_derivative(face) + self.L.get(face, 0.0) * self.expr
            out[face] = _on_face(r, grid, face)
        return out

    def flux_data(self, grid: Grid) -> dict[str, np.ndarray]:
        return {
            face: _on_face(self.kappa * self._normal_derivative(face), grid, face)
            for face in _NORMALS
        }

    def mean(self) -> float:
        return float(
            sym.integrate(self.expr, (X1, 0, self.length), (X2, 0, 1)) / self.length
        )


@dataclass(frozen=True)
class VectorCase:
    """Manufactured data for the slip-walled vector operator
    ``conv du/dx1 - mu Lap u - beta grad div u``.

    The exact field must be impermeable (``u1`` vanishing at the channel
    ends, ``u2`` on the walls); construction fails loudly otherwise.
    """

    u1: sym.Expr
    u2: sym.Expr
    length: float
    mu: float = 1.0
    beta: float = 0.0
    conv: float = 0.0
    alpha: float = 1.0

    def __post_init__(self) -> None:
        probes = [
            (self.u1.subs(X1, 0), "u1 at the inflow"),
            (self.u1.subs(X1, self.length), "u1 at the outflow"),
            (self.u2.subs(X2, 0), "u2 at the bottom wall"),
            (self.u2.subs(X2, 1), "u2 at the top wall"),
        ]
        for expr, where in probes:
            if sym.simplify(expr) != 0:
                raise ValueError(f"manufactured field is not impermeable: {where} = {expr}")

    def exact(self, grid: Grid) -> np.ndarray:
        return np.stack([_on_grid(self.u1, grid), _on_grid(self.u2, grid)])

    def force(self, grid: Grid) -> np.ndarray:
        div = sym.diff(self.u1, X1) + sym.diff(self.u2, X2)
        comps = []
        for c, u in enumerate((self.u1, self.u2)):
            lap = sym.diff(u, X1, 2) + sym.diff(u, X2, 2)
            f = (
                self.conv * sym.diff(u, X1)
                - self.mu * lap
                - self.beta * sym.diff(div, (X1, X2)[c])
            )
            comps.append(_on_grid(f, grid))
        return np.stack(comps)

    def slip_data(self, grid: Grid) -> dict[str, np.ndarray]:
        """B = mu (grad u + grad u^T) n . tau + alpha u . tau per face."""
        du12 = sym.diff(self.u1, X2) + sym.diff(self.u2, X1)
        exprs = {
            "bottom": -self.mu * du12 + self.alpha * self.u1,
            "top": self.mu * du12 + self.alpha * self.u1,
            "in": -self.mu * du12 + self.alpha * self.u2,
            "out": self.mu * du12 + self.alpha * self.u2,
        }
        return {face: _on_face(e, grid, face) for face, e in exprs.items()}


@dataclass(frozen=True)
class LinearStepCase:
    """Manufactured data for one full linearized step: momentum with
    pressure gradients, streamwise density transport with a frozen drift
    ``U``, and the convected Robin heat block."""

    u1: sym.Expr
    u2: sym.Expr
    sigma: sym.Expr
    eta: sym.Expr
    U1: sym.Expr
    U2: sym.Expr
    length: float
    params: FlowParams
    gas: GasModel

    def __post_init__(self) -> None:
        VectorCase(self.u1, self.u2, self.length,
                   mu=self.params.mu, alpha=self.params.alpha)
        for expr, where in ((self.U2.subs(X2, 0), "U2 on the bottom wall"),
                            (self.U2.subs(X2, 1), "U2 on the top wall")):
            if sym.simplify(expr) != 0:
                raise ValueError(f"drift is not impermeable: {where} = {expr}")

    def exact(self, grid: Grid):
        u = np.stack([_on_grid(self.u1, grid), _on_grid(self.u2, grid)])
        return u, _on_grid(self.sigma, grid), _on_grid(self.eta, grid)

    def drift(self, grid: Grid) -> np.ndarray:
        return np.stack([_on_grid(self.U1, grid), _on_grid(self.U2, grid)])

    def force(self, grid: Grid) -> np.ndarray:
        p = self.params
        vec = VectorCase(self.u1, self.u2, self.length, mu=p.mu,
                         beta=p.grad_div_momentum, conv=1.0, alpha=p.alpha)
        base = vec.force(grid)
        extra1 = self.gas.p1 * sym.diff(self.sigma, X1) + self.gas.p2 * sym.diff(self.eta, X1)
        extra2 = self.gas.p1 * sym.diff(self.sigma, X2) + self.gas.p2 * sym.diff(self.eta, X2)
        return base + np.stack([_on_grid(extra1, grid), _on_grid(extra2, grid)])

    def continuity_rhs(self, grid: Grid) -> np.ndarray:
        g = (
            sym.diff(self.u1, X1) + sym.diff(self.u2, X2)
            + sym.diff(self.sigma, X1)
            + self.U1 * sym.diff(self.sigma, X1)
            + self.U2 * sym.diff(self.sigma, X2)
        )
        return _on_grid(g, grid)

    def energy_rhs(self, grid: Grid) -> np.ndarray:
        p, gas = self.params, self.gas
        h = (
            gas.r0 * sym.diff(self.eta, X1)
            + gas.r1 * (sym.diff(self.u1, X1) + sym.diff(self.u2, X2))
            - p.kappa * (sym.diff(self.eta, X1, 2) + sym.diff(self.eta, X2, 2))
        )
        return _on_grid(h, grid)

    def slip_data(self, grid: Grid) -> dict[str, np.ndarray]:
        vec = VectorCase(self.u1, self.u2, self.length, mu=self.params.mu,
                         alpha=self.params.alpha)
        return vec.slip_data(grid)

    def sigma_inflow(self, grid: Grid) -> np.ndarray:
        return _on_face(self.sigma, grid, "in")

    def eta_robin_data(self, grid: Grid) -> dict[str, np.ndarray]:
        out = {}
        for face, (n1, n2) in _NORMALS.items():
            flux = n1 * sym.diff(self.eta, X1) + n2 * sym.diff(self.eta, X2)
            r = self.params.kappa * flux + self.params.L * self.eta
            out[face] = _on_face(r, grid, face)
        return out
