"""Residual evaluators, discrete norm reports, and the inequality suite.

The residual evaluator scores a physical state (v, rho, theta) against
the full flow system row by row.  Volume rows are evaluated with the
same stencils the solvers use (centered interior differences for
momentum and the temperature-form energy balance; the forward/upwind
marching stencil for the mass balance), so a converged solve scores at
solver precision rather than truncation error.  Boundary rows use the
second-order one-sided edge stencils.  Every row is reported in a
scaled discrete L2: root-mean-square over the row's evaluation set,
divided by ``1 + max(RMS of the constituent terms)``.

The inequality suite turns the estimates the construction leans on
(Poincare, Korn, interpolation, the linear-step energy bound) into a
calibrate-then-monitor protocol: constants are measured once on a
seeded random family, frozen to ``calibration.json``, and later runs
are checked against them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constitutive import (FlowParams, GasModel, dissipation,
                           stress_from_field, velocity_gradient)
from .data import ProblemData
from .elliptic import solve_neumann_poisson, solve_riesz_lift
from .grid import Grid, curl2d, diff, divergence, grad_div, gradient, laplacian
from .norms import lp_norm, sup_slice_norm, trace_lp, w1p_norm, w2p_norm

__all__ = [
    "ResidualReport",
    "InequalityVerdict",
    "residual_main_system",
    "scheme_residual_fields",
    "conservative_residual_fields",
    "coupling_factor",
    "norm_report",
    "check_poincare",
    "check_korn",
    "check_interpolation",
    "check_energy_estimate",
    "vstar_norm",
    "data_norm_sum",
    "weak_residuals",
    "effective_transport_residual",
    "random_scalar",
    "random_velocity",
    "calibrate",
    "run_inequality_suite",
    "monitor",
    "save_calibration",
    "load_calibration",
    "EPS_SWEEP",
]

EPS_SWEEP = (0.5, 0.1, 0.02)


# ---------------------------------------------------------------------------
# scaled-RMS plumbing
# ---------------------------------------------------------------------------


def _rms(arr: np.ndarray, comp_axes: int = 0) -> float:
    """Root mean square over nodes; leading ``comp_axes`` axes are summed
    pointwise (vector rows count through their magnitude)."""
    arr = np.asarray(arr, dtype=float)
    if comp_axes:
        arr = np.sqrt(np.sum(arr**2, axis=tuple(range(comp_axes))))
    if arr.size == 0:
        return 0.0
    return float(np.sqrt(np.mean(arr**2)))


def _scaled(res, groups, comp_axes: int = 0) -> float:
    scale = 1.0 + max((_rms(g, comp_axes) for g in groups), default=0.0)
    return _rms(res, comp_axes) / scale


def _concat_rms(values: list[np.ndarray]) -> float:
    if not values:
        return 0.0
    return _rms(np.concatenate([np.ravel(v) for v in values]))


# ---------------------------------------------------------------------------
# volume rows
# ---------------------------------------------------------------------------


def _momentum_parts(v, rho, theta, grid, params, gas, f):
    """Momentum row with the chain rule kept expanded, matching the way
    the right-hand side assembly splits the pressure gradient."""
    d = grid.dim
    conv = np.stack([
        rho * sum(v[a] * diff(v[k], a, grid.h[a]) for a in range(d))
        for k in range(d)
    ])
    lap = np.stack([params.mu * laplacian(v[k], grid) for k in range(d)])
    gd = params.grad_div_momentum * grad_div(v, grid)
    pr = gas.pi_rho(rho, theta) * gradient(rho, grid)
    pt = gas.pi_theta(rho, theta) * gradient(theta, grid)
    force = rho * np.asarray(f, dtype=float)
    res = conv - lap - gd + pr + pt - force
    return res, (conv, lap, gd, pr, pt, force)


def _energy_parts(v, rho, theta, grid, params, gas):
    """Internal energy balance in temperature form."""
    gt = gradient(theta, grid)
    conv = rho * gas.energy_theta(rho, theta) * sum(
        v[a] * gt[a] for a in range(grid.dim))
    comp = theta * gas.pi_theta(rho, theta) * divergence(v, grid)
    diss = dissipation(velocity_gradient(v, grid), params.mu, params.lam)
    cond = params.kappa * laplacian(theta, grid)
    res = conv + comp - diss - cond
    return res, (conv, comp, diss, cond)


def _continuity_parts(v, rho, grid):
    """Mass balance in the marching stencil: forward difference in x1
    with row-i coefficients, sign-upwind in x2 (the wall values of the
    cross-stream speed are zeroed exactly as the marcher does).  Defined
    on every streamwise row but the last."""
    h1, h2 = grid.h
    a = np.array(v[1], dtype=float)
    a[:, 0] = 0.0
    a[:, -1] = 0.0
    dw = (rho[:, 1:] - rho[:, :-1]) / h2
    flux = np.zeros_like(rho)
    flux[:, 1:] += np.maximum(a, 0.0)[:, 1:] * dw
    flux[:, :-1] += np.minimum(a, 0.0)[:, :-1] * dw
    mass = (rho * divergence(v, grid))[:-1]
    stream = v[0][:-1] * (rho[1:] - rho[:-1]) / h1
    cross = flux[:-1]
    res = mass + stream + cross
    return res, (mass, stream, cross)


def scheme_residual_fields(v, rho, theta, grid, data: ProblemData,
                           params: FlowParams, gas: GasModel) -> dict:
    """Raw residual fields of the three volume rows (scheme stencils).

    Momentum/energy cover the whole grid (edge values use one-sided
    stencils and are not part of the reported score); continuity covers
    rows ``[:-1]``.
    """
    m, _ = _momentum_parts(v, rho, theta, grid, params, gas, data.f)
    e, _ = _energy_parts(v, rho, theta, grid, params, gas)
    c, _ = _continuity_parts(v, rho, grid)
    return {"momentum": m, "continuity": c, "energy": e}


def conservative_residual_fields(v, rho, theta, grid, data: ProblemData,
                                 params: FlowParams, gas: GasModel) -> dict:
    """Volume rows in conservative/chain-rule form (``grad pi`` direct,
    ``div(rho v)``, flux-form energy).  Centered stencils throughout;
    differs from the scheme form by O(h^2) product/chain commutators."""
    d = grid.dim
    conv = np.stack([
        rho * sum(v[a] * diff(v[k], a, grid.h[a]) for a in range(d))
        for k in range(d)
    ])
    visc = np.stack([params.mu * laplacian(v[k], grid) for k in range(d)]) \
        + params.grad_div_momentum * grad_div(v, grid)
    momentum = conv - visc + gradient(gas.pi(rho, theta), grid) \
        - rho * np.asarray(data.f, dtype=float)
    continuity = divergence(rho * v, grid)
    energy = divergence(rho * gas.energy(rho, theta) * v, grid) \
        + gas.pi(rho, theta) * divergence(v, grid) \
        - dissipation(velocity_gradient(v, grid), params.mu, params.lam) \
        - params.kappa * laplacian(theta, grid)
    return {"momentum": momentum, "continuity": continuity, "energy": energy}


def coupling_factor(rho, theta, gas: GasModel):
    """Weight tying the flux-form energy row to the temperature-form one:
    flux row = temperature row + coupling * continuity row (+ O(h^2))."""
    return gas.energy(rho, theta) + (
        gas.pi(rho, theta) - theta * gas.pi_theta(rho, theta)) / rho


# ---------------------------------------------------------------------------
# boundary rows
# ---------------------------------------------------------------------------


def _normal_derivative(field, grid, face):
    sign = 1.0 if face.side == 1 else -1.0
    return sign * diff(field, face.axis, grid.h[face.axis])[grid.face_slicer(face)]


def _face_dict(data, name):
    if not data:
        return 0.0
    v = data.get(name)
    return 0.0 if v is None else np.asarray(v, dtype=float)


@dataclass(frozen=True)
class ResidualReport:
    """Scaled discrete-L2 residuals, one entry per row of the system."""

    momentum: float
    continuity: float
    energy: float
    slip: float
    normal: float
    heat: float
    density: float

    @property
    def volume_max(self) -> float:
        return max(self.momentum, self.continuity, self.energy)

    @property
    def all_max(self) -> float:
        return max(self.volume_max, self.slip, self.normal, self.heat,
                   self.density)

    def as_dict(self) -> dict:
        return {
            "momentum": self.momentum,
            "continuity": self.continuity,
            "energy": self.energy,
            "bc_slip": self.slip,
            "bc_normal": self.normal,
            "bc_heat": self.heat,
            "bc_density": self.density,
        }


def residual_main_system(v, rho, theta, grid: Grid, data: ProblemData,
                         params: FlowParams, gas: GasModel) -> ResidualReport:
    """Score a physical state against every row of the flow system.

    Volume rows are restricted to the nodes where their scheme stencil
    applies (interior for momentum/energy, all-but-last streamwise rows
    for continuity); the five boundary rows are evaluated with one-sided
    second-order normal derivatives on their faces.
    """
    v = np.asarray(v, dtype=float)
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    inner = (slice(1, -1), slice(1, -1))

    m_res, m_grp = _momentum_parts(v, rho, theta, grid, params, gas, data.f)
    momentum = _scaled(m_res[(slice(None),) + inner],
                       [g[(slice(None),) + inner] for g in m_grp],
                       comp_axes=1)

    c_res, c_grp = _continuity_parts(v, rho, grid)
    continuity = _scaled(c_res, c_grp)

    e_res, e_grp = _energy_parts(v, rho, theta, grid, params, gas)
    energy = _scaled(e_res[inner], [g[inner] for g in e_grp])

    S = stress_from_field(v, grid, params.mu, params.lam)
    slip_res, slip_grp = [], ([], [], [])
    norm_res, norm_grp = [], ([], [])
    heat_res, heat_grp = [], ([], [], [])
    for face in grid.faces:
        sl = grid.face_slicer(face)
        n = face.normal
        un = sum(n[i] * v[i][sl] for i in range(grid.dim))
        d_datum = _face_dict(data.d, face.name)
        norm_res.append(un - d_datum)
        norm_grp[0].append(np.broadcast_to(un, un.shape))
        norm_grp[1].append(np.broadcast_to(np.asarray(d_datum), un.shape))

        for k, tau in enumerate(face.tangents):
            tract = sum(tau[i] * S[i, a][sl] * n[a]
                        for i in range(grid.dim) for a in range(grid.dim))
            ut = sum(tau[i] * v[i][sl] for i in range(grid.dim))
            b_datum = np.asarray(data.b[face.name][k], dtype=float)
            slip_res.append(tract + params.alpha * ut - b_datum)
            slip_grp[0].append(tract)
            slip_grp[1].append(params.alpha * ut)
            slip_grp[2].append(b_datum)

        flux = params.kappa * _normal_derivative(theta, grid, face)
        exch = params.L * (theta[sl] - gas.T0 - _face_dict(data.T1, face.name))
        g_datum = np.broadcast_to(np.asarray(_face_dict(data.g, face.name)),
                                  flux.shape)
        heat_res.append(flux + exch - g_datum)
        heat_grp[0].append(flux)
        heat_grp[1].append(exch)
        heat_grp[2].append(np.array(g_datum))

    def scaled_bc(res, grps):
        scale = 1.0 + max(_concat_rms(list(g)) for g in grps)
        return _concat_rms(res) / scale

    slip = scaled_bc(slip_res, slip_grp)
    normal = scaled_bc(norm_res, norm_grp)
    heat = scaled_bc(heat_res, heat_grp)

    sl_in = grid.face_slicer("in")
    dens_res = rho[sl_in] - np.asarray(data.rho_in, dtype=float)
    density = _scaled(dens_res, [rho[sl_in], data.rho_in])

    return ResidualReport(momentum, continuity, energy, slip, normal, heat,
                          density)


# ---------------------------------------------------------------------------
# norm report
# ---------------------------------------------------------------------------


def norm_report(field, grid: Grid, p: float) -> dict:
    """The standard battery of discrete norms for one field."""
    field = np.asarray(field, dtype=float)
    comp = field.ndim - grid.dim
    mag = field if comp == 0 else np.sqrt(np.sum(field**2, axis=0))
    rep = {
        "l2": lp_norm(field, grid, 2.0),
        "lp": lp_norm(field, grid, p),
        "w12": w1p_norm(field, grid, 2.0),
        "w1p": w1p_norm(field, grid, p),
        "w2p": w2p_norm(field, grid, p),
        "linf": float(np.max(np.abs(mag))),
        "linf_l2": sup_slice_norm(field, grid),
    }
    for face in grid.faces:
        rep[f"trace_l2_{face.name}"] = trace_lp(mag[grid.face_slicer(face)],
                                                grid, face, 2.0)
    return rep


# ---------------------------------------------------------------------------
# inequality checkers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InequalityVerdict:
    inequality: str
    lhs: float
    rhs: float
    constant: float
    passed: bool

    def as_dict(self) -> dict:
        return {"inequality": self.inequality, "lhs": self.lhs,
                "rhs": self.rhs, "constant": self.constant,
                "passed": self.passed}


def _poincare_sides(field, grid, variant, gamma1, gamma2):
    grad_sq = lp_norm(gradient(field, grid), grid, 2.0) ** 2
    t1 = trace_lp(field[grid.face_slicer(gamma1)], grid, gamma1, 2.0) ** 2
    if variant == "boundary":
        t2 = trace_lp(field[grid.face_slicer(gamma2)], grid, gamma2, 2.0) ** 2
        return t1, t2 + grad_sq
    if variant == "volume":
        return lp_norm(field, grid, 2.0) ** 2, t1 + grad_sq
    raise ValueError(f"unknown Poincare variant {variant!r}")


def check_poincare(field, grid: Grid, constant: float, *,
                   variant: str = "volume", gamma1: str = "in",
                   gamma2: str = "out") -> InequalityVerdict:
    """Trace-to-trace (``variant='boundary'``) or volume-to-trace
    (``variant='volume'``) Poincare bound with a calibrated constant."""
    lhs, rhs = _poincare_sides(np.asarray(field, dtype=float), grid,
                               variant, gamma1, gamma2)
    return InequalityVerdict(f"poincare_{variant}", lhs, rhs, constant,
                             lhs <= constant * rhs * (1 + 1e-12) + 1e-300)


def korn_sides(u, grid: Grid, params: FlowParams) -> tuple[float, float]:
    u = np.asarray(u, dtype=float)
    gv = velocity_gradient(u, grid)
    div = np.trace(gv, axis1=0, axis2=1)
    dev = gv + np.swapaxes(gv, 0, 1)
    for i in range(grid.dim):
        dev[i, i] -= 2.0 * div / 3.0
    lhs = params.mu * grid.integrate(np.sum(dev**2, axis=(0, 1)))
    for face in grid.faces:
        sl = grid.face_slicer(face)
        un = sum(face.normal[i] * u[i][sl] for i in range(grid.dim))
        surf = un**2
        for tau in face.tangents:
            ut = sum(tau[i] * u[i][sl] for i in range(grid.dim))
            surf = surf + params.alpha * ut**2
        lhs += grid.integrate_face(face, surf)
    rhs = w1p_norm(u, grid, 2.0) ** 2
    return float(lhs), float(rhs)


def check_korn(u, grid: Grid, params: FlowParams,
               constant: float) -> InequalityVerdict:
    """Boundary-weighted Korn bound: the deviatoric dissipation plus the
    slip/normal boundary energies control the full first-order norm."""
    lhs, rhs = korn_sides(u, grid, params)
    return InequalityVerdict("korn", lhs, rhs, constant,
                             lhs >= constant * rhs * (1 - 1e-12))


def check_interpolation(field, grid: Grid, p: float, eps: float,
                        constant: float) -> InequalityVerdict:
    lhs = lp_norm(field, grid, p)
    rhs = eps * lp_norm(gradient(field, grid), grid, p) \
        + constant * lp_norm(field, grid, 2.0)
    return InequalityVerdict(f"interpolation_eps_{eps}", lhs, rhs, constant,
                             lhs <= rhs * (1 + 1e-12) + 1e-300)


def vstar_norm(F, grid: Grid) -> float:
    """Dual-space size of a volume force: first-order norm of the
    componentwise Riesz lift ``(-Lap + 1) r = F_k`` with zero flux."""
    F = np.asarray(F, dtype=float)
    if F.ndim == grid.dim:
        F = F[None]
    total = 0.0
    for comp in F:
        total += w1p_norm(solve_riesz_lift(grid, comp), grid, 2.0) ** 2
    return math.sqrt(total)


def data_norm_sum(lp_data, grid: Grid) -> float:
    """Right-hand-side size of the linear step: Riesz-lifted force plus
    plain L2 of the scalar sources plus boundary traces."""
    total = vstar_norm(lp_data.F, grid)
    total += lp_norm(lp_data.G, grid, 2.0)
    total += lp_norm(lp_data.H, grid, 2.0)
    btotal = 0.0
    for face in grid.faces:
        datum = lp_data.B.get(face.name)
        if datum is not None:
            btotal += trace_lp(datum, grid, face, 2.0) ** 2
    total += math.sqrt(btotal)
    total += trace_lp(lp_data.sigma_in, grid, "in", 2.0)
    return total


def check_energy_estimate(lp_data, state, grid: Grid,
                          constant: float) -> InequalityVerdict:
    """Weak-norm output vs data size for one linear step."""
    lhs = w1p_norm(state.u, grid, 2.0) + sup_slice_norm(state.sigma, grid) \
        + w1p_norm(state.eta, grid, 2.0)
    rhs = data_norm_sum(lp_data, grid)
    return InequalityVerdict("energy_estimate", lhs, rhs, constant,
                             lhs <= constant * rhs * (1 + 1e-12) + 1e-300)


# ---------------------------------------------------------------------------
# weak-form residuals
# ---------------------------------------------------------------------------


def weak_residuals(state, lp_data, grid: Grid, params: FlowParams,
                   gas: GasModel, *, rng: np.random.Generator,
                   n_tests: int = 10, eta_robin_data=None) -> dict:
    """Trapezoid-quadrature weak residuals of the three linear-step rows,
    each normalized by the first-order norm of its test field and
    maximized over ``n_tests`` random test fields.

    The inflow term of the mass row carries the streamwise weight
    ``1 + U1`` that the integration by parts actually produces.
    """
    u, sigma, eta = state.u, state.sigma, state.eta
    F, G, H, B, sigma_in, U = (lp_data.F, lp_data.G, lp_data.H, lp_data.B,
                               lp_data.sigma_in, lp_data.U)
    x1 = grid.coords[0]
    ell = grid.channel.length
    Su = stress_from_field(u, grid, params.mu, params.lam)
    div_u = divergence(u, grid)
    d1u = np.stack([diff(u[k], 0, grid.h[0]) for k in range(grid.dim)])
    util = U.copy()
    util[0] = util[0] + 1.0
    div_util = divergence(util, grid)
    d1eta = diff(eta, 0, grid.h[0])
    grad_eta = gradient(eta, grid)

    out = {"momentum": 0.0, "mass": 0.0, "energy": 0.0}
    for _ in range(n_tests):
        v = random_velocity(grid, rng)
        gv = velocity_gradient(v, grid)
        vol = np.sum(v * d1u, axis=0) + np.sum(Su * gv, axis=(0, 1)) \
            - (gas.p1 * sigma + gas.p2 * eta) * np.trace(gv, axis1=0, axis2=1) \
            - np.sum(F * v, axis=0)
        r = grid.integrate(vol)
        for face in grid.faces:
            sl = grid.face_slicer(face)
            for k, tau in enumerate(face.tangents):
                ut = sum(tau[i] * u[i][sl] for i in range(grid.dim))
                vt = sum(tau[i] * v[i][sl] for i in range(grid.dim))
                surf = params.alpha * ut * vt
                datum = B.get(face.name)
                if datum is not None:
                    surf = surf - datum * vt
                r += grid.integrate_face(face, surf)
        out["momentum"] = max(out["momentum"],
                              abs(r) / w1p_norm(v, grid, 2.0))

        phi = random_scalar(grid, rng) * (ell - x1) / ell
        gphi = gradient(phi, grid)
        vol = -sigma * np.sum(util * gphi, axis=0) - sigma * phi * div_util \
            - phi * (G - div_u)
        r = grid.integrate(vol)
        sl = grid.face_slicer("in")
        r -= grid.integrate_face("in", sigma_in * phi[sl] * util[0][sl])
        out["mass"] = max(out["mass"], abs(r) / w1p_norm(phi, grid, 2.0))

        w = random_scalar(grid, rng)
        gw = gradient(w, grid)
        vol = gas.r0 * d1eta * w + gas.r1 * w * div_u \
            + params.kappa * np.sum(gw * grad_eta, axis=0) - H * w
        r = grid.integrate(vol)
        for face in grid.faces:
            sl = grid.face_slicer(face)
            surf = params.L * w[sl] * eta[sl]
            if eta_robin_data and face.name in eta_robin_data:
                surf = surf - w[sl] * eta_robin_data[face.name]
            r += grid.integrate_face(face, surf)
        out["energy"] = max(out["energy"], abs(r) / w1p_norm(w, grid, 2.0))

    strong = {
        "momentum": lp_norm(
            d1u - np.stack([params.mu * laplacian(u[k], grid)
                            for k in range(grid.dim)])
            - params.grad_div_momentum * grad_div(u, grid)
            + gas.p1 * gradient(sigma, grid) + gas.p2 * grad_eta - F,
            grid, 2.0),
        "mass": lp_norm(div_u + diff(sigma, 0, grid.h[0])
                        + np.sum(U * gradient(sigma, grid), axis=0) - G,
                        grid, 2.0),
        "energy": lp_norm(gas.r0 * d1eta + gas.r1 * div_u
                          - params.kappa * laplacian(eta, grid) - H,
                          grid, 2.0),
    }
    out["strong"] = strong
    out["ratio"] = max(out[k] / max(strong[k], 1e-300)
                       for k in ("momentum", "mass", "energy"))
    return out


# ---------------------------------------------------------------------------
# effective transport identity
# ---------------------------------------------------------------------------


def effective_transport_residual(u, sigma, U, G, grid: Grid,
                                 params: FlowParams,
                                 gas: GasModel) -> tuple[np.ndarray, dict]:
    """Residual of the damped density equation obtained by eliminating
    ``div u`` through the potential part of the velocity.

    The potential solves the Neumann problem ``Lap phi = div u`` with
    ``dphi/dn = u . n``, so its (3-point) Laplacian reproduces ``div u``
    at every interior row up to the constant compatibility shift of the
    bordered solve.  At a converged linear step the residual then
    collapses to the centered-vs-upwind stencil gap of the density march,
    hence O(h) under refinement.
    """
    u = np.asarray(u, dtype=float)
    div_u = divergence(u, grid)
    flux = {f.name: sum(f.normal[i] * u[i][grid.face_slicer(f)]
                        for i in range(grid.dim)) for f in grid.faces}
    pois = solve_neumann_poisson(grid, -div_u, flux, kappa=1.0)
    visc = params.lam + 4.0 * params.mu / 3.0
    gamma = gas.gamma(params.mu, params.lam)
    div_eff = laplacian(pois.field, grid)
    K = (-visc * div_eff + gas.p1 * sigma) / visc + G
    gs = gradient(sigma, grid)
    res = gamma * sigma + gs[0] + U[0] * gs[0] + U[1] * gs[1] - K
    info = {
        "gamma": gamma,
        "l2": lp_norm(res, grid, 2.0),
        "linf": float(np.max(np.abs(res))),
        "compat": pois.multiplier,
    }
    return res, info


def vorticity(u, grid: Grid) -> np.ndarray:
    """Scalar vorticity omega of the planar velocity (the rotation field
    of the decomposition diagnostics)."""
    return curl2d(u, grid)


# ---------------------------------------------------------------------------
# random families and calibration
# ---------------------------------------------------------------------------


def random_scalar(grid: Grid, rng: np.random.Generator,
                  modes: int = 2) -> np.ndarray:
    x1, x2 = grid.coords
    ell = grid.channel.length
    f = np.zeros(grid.shape)
    for k in range(modes + 1):
        for m in range(modes + 1):
            c = rng.standard_normal(4) / (1.0 + k * k + m * m)
            a1, b1 = np.cos(k * np.pi * x1 / ell), np.sin(k * np.pi * x1 / ell)
            a2, b2 = np.cos(m * np.pi * x2), np.sin(m * np.pi * x2)
            f += c[0] * a1 * a2 + c[1] * a1 * b2 + c[2] * b1 * a2 + c[3] * b1 * b2
    return f


def random_velocity(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    """Random smooth field with exactly vanishing normal trace: each
    component carries a polynomial bubble along its own axis."""
    x1, x2 = grid.coords
    ell = grid.channel.length
    u1 = 4.0 * x1 * (ell - x1) / ell**2 * random_scalar(grid, rng)
    u2 = 4.0 * x2 * (1.0 - x2) * random_scalar(grid, rng)
    return np.stack([u1, u2])


def _random_trace(grid: Grid, face, rng: np.random.Generator) -> np.ndarray:
    x = grid.face_coords(face)[0 if face.axis == 1 else 1]
    c = rng.standard_normal(3)
    span = x[-1] - x[0] if x[-1] > x[0] else 1.0
    return c[0] + c[1] * np.cos(np.pi * x / span) + c[2] * np.sin(np.pi * x / span)


def calibrate(grid: Grid, params: FlowParams, gas: GasModel, p: float, *,
              seed: int = 1729, n_fields: int = 100,
              n_data: int = 20) -> dict:
    """Measure every inequality constant on a seeded random family.

    Returns a JSON-ready dict: sharpest observed constants for the two
    Poincare variants, Korn, the interpolation sweep, and the linear-step
    energy estimate (with per-sample ratios kept for drift statistics).
    """
    rng = np.random.default_rng(seed)
    fields = [np.ones(grid.shape)] + [random_scalar(grid, rng)
                                      for _ in range(n_fields - 1)]

    cal: dict = {"seed": seed, "grid": list(grid.n), "p": p}
    for variant in ("boundary", "volume"):
        cal[f"poincare_{variant}"] = max(
            lhs / rhs for lhs, rhs in
            (_poincare_sides(f, grid, variant, "in", "out") for f in fields))

    korn_ratios = []
    for _ in range(n_fields):
        lhs, rhs = korn_sides(random_velocity(grid, rng), grid, params)
        korn_ratios.append(lhs / rhs)
    cal["korn"] = min(korn_ratios)

    interp = {}
    for eps in EPS_SWEEP:
        interp[str(eps)] = max(
            (lp_norm(f, grid, p) - eps * lp_norm(gradient(f, grid), grid, p))
            / lp_norm(f, grid, 2.0) for f in fields)
    cal["interpolation"] = interp

    from .picard import LinearProblemData, solve_linear_step

    ratios = []
    for _ in range(n_data):
        scale = 1e-3
        lp_data = LinearProblemData(
            F=scale * np.stack([random_scalar(grid, rng),
                                random_scalar(grid, rng)]),
            G=scale * random_scalar(grid, rng),
            H=scale * random_scalar(grid, rng),
            B={f.name: scale * _random_trace(grid, f, rng)
               for f in grid.faces},
            sigma_in=scale * _random_trace(grid, grid.face("in"), rng),
            U=np.zeros((grid.dim,) + grid.shape),
        )
        state, _ = solve_linear_step(grid, lp_data, params, gas)
        verdict = check_energy_estimate(lp_data, state, grid, np.inf)
        ratios.append(verdict.lhs / verdict.rhs)
    cal["energy_estimate"] = {
        "constant": max(ratios),
        "median": float(np.median(ratios)),
        "samples": ratios,
    }
    return cal


def run_inequality_suite(grid: Grid, params: FlowParams, gas: GasModel,
                         p: float, cal: dict, *, seed: int = 271828,
                         n_fields: int = 25) -> list[InequalityVerdict]:
    """Check fresh random fields against the frozen constants (drift
    allowance 2x, matching the monitor)."""
    rng = np.random.default_rng(seed)
    verdicts = []
    for _ in range(n_fields):
        f = random_scalar(grid, rng)
        for variant in ("boundary", "volume"):
            verdicts.append(check_poincare(
                f, grid, 2.0 * cal[f"poincare_{variant}"], variant=variant))
        for eps in EPS_SWEEP:
            verdicts.append(check_interpolation(
                f, grid, p, eps, 2.0 * cal["interpolation"][str(eps)]))
        verdicts.append(check_korn(random_velocity(grid, rng), grid, params,
                                   0.5 * cal["korn"]))
    return verdicts


def monitor(frozen: dict, fresh: dict, *, drift: float = 2.0) -> list[str]:
    """Compare a re-measured calibration against the frozen one; any
    constant moving by more than ``drift``x in either direction is
    flagged."""
    flags = []

    def check(key, old, new):
        lo, hi = old / drift, old * drift
        if not (lo <= new <= hi):
            flags.append(f"{key}: frozen {old:.6g}, measured {new:.6g}")

    for key in ("poincare_boundary", "poincare_volume", "korn"):
        check(key, frozen[key], fresh[key])
    for eps, val in frozen["interpolation"].items():
        check(f"interpolation[{eps}]", val, fresh["interpolation"][eps])
    check("energy_estimate", frozen["energy_estimate"]["constant"],
          fresh["energy_estimate"]["constant"])
    return flags


def save_calibration(path, cal: dict) -> None:
    Path(path).write_text(json.dumps(cal, indent=2, sort_keys=True) + "\n")


def load_calibration(path) -> dict:
    return json.loads(Path(path).read_text())
