"""Perturbation right-hand sides, the block-split linear step, and the
outer successive-approximation loop.

The unknowns are the deviations (u, sigma, eta) of velocity, density,
and temperature from the background flow (unit axial velocity plus the
normal-datum lift, unit density, reference temperature field).  One
outer step freezes the right-hand sides F, G, H, B at the current
iterate and solves the linear system

    d/dx1 u - div S(grad u) + p1 grad sigma + p2 grad eta = F,
    div u + d/dx1 sigma + U . grad sigma               = G,
    r0 d/dx1 eta + r1 div u - kappa Lap eta            = H,

with slip data B, inflow density sigma_in, and drift U = u + u0, by a
block Gauss-Seidel sweep: momentum solve with the scalar gradients on
the right, transport march for sigma, Robin solve for eta.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .background import Background, axial_flow, build_background
from .constitutive import FlowParams, GasModel, dissipation, stress_from_field
from .data import ProblemData, data_size
from .diagnostics import residual_main_system
from .elliptic import solve_lame, solve_robin_scalar
from .grid import Grid, diff, divergence, grad_div, gradient, laplacian
from .norms import sup_slice_norm, w1p_norm, w2p_norm
from .transport import transport_from_drift

__all__ = [
    "FlowState",
    "LinearProblemData",
    "LinearStepInfo",
    "IterationReport",
    "StagnationError",
    "DivergenceError",
    "assemble_FGH",
    "solve_linear_step",
    "linear_block_residuals",
    "picard_iterate",
    "reconstruct_physical",
    "perturbation_of",
    "weak_distance",
    "strong_state_norm",
    "uniqueness_probe",
]


class StagnationError(RuntimeError):
    """Inner loop stopped contracting; message lists block residuals."""


class DivergenceError(RuntimeError):
    """Outer loop left the small-perturbation regime."""

    def __init__(self, message: str, report: "IterationReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class FlowState:
    """Perturbation triple; the velocity keeps a zero normal trace."""

    u: np.ndarray
    sigma: np.ndarray
    eta: np.ndarray

    @classmethod
    def zero(cls, grid: Grid) -> "FlowState":
        return cls(np.zeros((grid.dim,) + grid.shape), np.zeros(grid.shape),
                   np.zeros(grid.shape))


@dataclass(frozen=True)
class LinearProblemData:
    """Frozen right-hand sides of one outer step."""

    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    B: dict[str, np.ndarray]
    sigma_in: np.ndarray
    U: np.ndarray


@dataclass(frozen=True)
class LinearStepInfo:
    sweeps: int
    increment: float
    converged: bool
    residuals: dict[str, float]


def weak_distance(a: FlowState, b: FlowState, grid: Grid) -> float:
    """First-order norm of the velocity/temperature gap plus the sliced
    L2 of the density gap -- the energy-estimate topology."""
    return (w1p_norm(a.u - b.u, grid, 2.0)
            + sup_slice_norm(a.sigma - b.sigma, grid)
            + w1p_norm(a.eta - b.eta, grid, 2.0))


def strong_state_norm(state: FlowState, grid: Grid, p: float) -> float:
    return (w2p_norm(state.u, grid, p) + w1p_norm(state.sigma, grid, p)
            + w2p_norm(state.eta, grid, p))


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------


def assemble_FGH(state: FlowState, bg: Background, data: ProblemData,
                 params: FlowParams, gas: GasModel,
                 grid: Grid) -> LinearProblemData:
    """Evaluate the frozen right-hand sides at the given iterate.

    Every term carries at least one perturbation or datum factor, so the
    zero state with background data maps to identically zero sides.  The
    energy side is assembled in the unsubstituted form (the reference
    temperature's own equation is *not* used to cancel terms), which
    keeps the main-system residual of a converged iterate at solver
    precision even when the background carries its constant defect.
    """
    u, sigma, eta = state.u, state.sigma, state.eta
    rho = 1.0 + sigma
    theta_bg = bg.theta
    theta = theta_bg + eta
    gas.check_state(rho, theta)

    d = grid.dim
    u0 = bg.u0
    w = u + u0
    p1, p2 = gas.p1, gas.p2
    mu, beta = params.mu, params.grad_div_momentum

    grad_sigma = gradient(sigma, grid)
    grad_pert_theta = gradient(eta, grid) + gradient(theta_bg, grid)
    pi_r = gas.pi_rho(rho, theta)
    pi_t = gas.pi_theta(rho, theta)

    grad_w = [gradient(w[k], grid) for k in range(d)]
    adv_w = np.stack([sum(w[a] * grad_w[k][a] for a in range(d))
                      for k in range(d)])
    d1_w = np.stack([grad_w[k][0] for k in range(d)])
    visc_u0 = np.stack([mu * laplacian(u0[k], grid) for k in range(d)]) \
        + beta * grad_div(u0, grid)
    d1_u0 = np.stack([diff(u0[k], 0, grid.h[0]) for k in range(d)])

    F = (rho * np.asarray(data.f, dtype=float)
         - p2 * gradient(theta_bg, grid)
         - (pi_r - p1) * grad_sigma
         - (pi_t - p2) * grad_pert_theta
         + visc_u0 - d1_u0
         - rho * adv_w - sigma * d1_w)

    div_u = divergence(u, grid)
    div_u0 = divergence(u0, grid)
    G = -rho * div_u0 - sigma * div_u

    diss_w = dissipation(np.stack(grad_w), params.mu, params.lam)
    conv_theta = grad_pert_theta[0] + sum(w[a] * grad_pert_theta[a]
                                          for a in range(d))
    H = (diss_w
         + (gas.r1 - theta * pi_t) * div_u
         - theta * pi_t * div_u0
         + gas.r0 * diff(eta, 0, grid.h[0])
         - rho * gas.energy_theta(rho, theta) * conv_theta
         + params.kappa * laplacian(theta_bg, grid))

    S0 = stress_from_field(u0, grid, params.mu, params.lam)
    B = {}
    for face in grid.faces:
        sl = grid.face_slicer(face)
        tau = face.tangents[0]
        tract = sum(tau[i] * S0[i, a][sl] * face.normal[a]
                    for i in range(d) for a in range(d))
        u0_t = sum(tau[i] * u0[i][sl] for i in range(d))
        B[face.name] = (data.slip_defect(grid, face, 0, params)
                        - tract - params.alpha * u0_t)

    return LinearProblemData(F=F, G=G, H=H, B=B, sigma_in=data.sigma_in,
                             U=w)


# ---------------------------------------------------------------------------
# one linear step
# ---------------------------------------------------------------------------


def linear_block_residuals(state: FlowState, lp: LinearProblemData,
                           params: FlowParams, gas: GasModel,
                           grid: Grid) -> dict[str, float]:
    """Centered interior RMS residual of each block row (diagnostic)."""
    u, sigma, eta = state.u, state.sigma, state.eta
    d = grid.dim
    div_u = divergence(u, grid)
    mom = (np.stack([diff(u[k], 0, grid.h[0])
                     - params.mu * laplacian(u[k], grid) for k in range(d)])
           - params.grad_div_momentum * grad_div(u, grid)
           + gas.p1 * gradient(sigma, grid) + gas.p2 * gradient(eta, grid)
           - lp.F)
    gs = gradient(sigma, grid)
    mass = div_u + gs[0] + sum(lp.U[a] * gs[a] for a in range(d)) - lp.G
    ene = (gas.r0 * diff(eta, 0, grid.h[0]) + gas.r1 * div_u
           - params.kappa * laplacian(eta, grid) - lp.H)
    inner = (slice(1, -1), slice(1, -1))

    def rms(x):
        return float(np.sqrt(np.mean(x**2)))

    return {
        "momentum": rms(np.sqrt(np.sum(mom[(slice(None),) + inner]**2,
                                       axis=0))),
        "mass": rms(mass[inner]),
        "energy": rms(ene[inner]),
    }


def solve_linear_step(grid: Grid, lp: LinearProblemData, params: FlowParams,
                      gas: GasModel, *, tol: float = 1e-11,
                      max_sweeps: int = 200, eta_robin_data=None,
                      initial: FlowState | None = None
                      ) -> tuple[FlowState, LinearStepInfo]:
    """Block Gauss-Seidel solve of the frozen linear system.

    Sweeps momentum -> transport -> heat until the sup-norm update drops
    below ``tol``.  A ratio of successive updates staying >= 0.999 for
    20 consecutive sweeps raises :class:`StagnationError` with the block
    residuals; running out of sweeps while still contracting only warns.
    """
    if initial is None:
        initial = FlowState.zero(grid)
    u, sigma, eta = initial.u, initial.sigma, initial.eta

    prev_inc = np.inf
    stalled = 0
    inc = np.inf
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        force = (lp.F - gas.p1 * gradient(sigma, grid)
                 - gas.p2 * gradient(eta, grid))
        u_new = solve_lame(grid, force, lp.B, mu=params.mu, lam=params.lam,
                           alpha=params.alpha,
                           grad_div=params.grad_div_momentum, convection=1.0)
        div_u = divergence(u_new, grid)
        sigma_new = transport_from_drift(grid, lp.U, lp.G - div_u,
                                         lp.sigma_in)
        eta_new = solve_robin_scalar(grid, lp.H - gas.r1 * div_u,
                                     eta_robin_data, kappa=params.kappa,
                                     L=params.L, convection=gas.r0)
        inc = max(float(np.max(np.abs(u_new - u))),
                  float(np.max(np.abs(sigma_new - sigma))),
                  float(np.max(np.abs(eta_new - eta))))
        u, sigma, eta = u_new, sigma_new, eta_new
        if not np.isfinite(inc):
            raise StagnationError(
                f"inner loop produced a non-finite update at sweep {sweeps}")
        if inc < tol:
            converged = True
            break
        stalled = stalled + 1 if inc >= 0.999 * prev_inc else 0
        if stalled >= 20:
            state = FlowState(u, sigma, eta)
            blocks = linear_block_residuals(state, lp, params, gas, grid)
            raise StagnationError(
                "inner loop stagnated: update ratio >= 0.999 for 20 sweeps "
                f"(sweep {sweeps}, increment {inc:.3e}); block residuals "
                + ", ".join(f"{k}={v:.3e}" for k, v in blocks.items()))
        prev_inc = inc

    state = FlowState(u, sigma, eta)
    if not converged:
        warnings.warn(
            f"inner loop hit {max_sweeps} sweeps with increment {inc:.3e}",
            RuntimeWarning, stacklevel=2)
    info = LinearStepInfo(sweeps=sweeps, increment=inc, converged=converged,
                          residuals=linear_block_residuals(state, lp, params,
                                                           gas, grid))
    return state, info


# ---------------------------------------------------------------------------
# outer loop
# ---------------------------------------------------------------------------


@dataclass
class IterationReport:
    """Per-step history of the outer loop (JSON-ready rows)."""

    steps: list
    converged: bool
    data_size: float
    constant: float
    message: str = ""

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def final_residuals(self) -> dict:
        return self.steps[-1].get("residuals", {}) if self.steps else {}


def reconstruct_physical(state: FlowState, bg: Background,
                         grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Back to physical variables: (velocity, density, temperature)."""
    rho = 1.0 + state.sigma
    if float(np.min(rho)) <= 0.0:
        idx = np.unravel_index(int(np.argmin(rho)), grid.shape)
        raise ValueError(f"reconstructed density {float(rho[idx]):.4g} <= 0 "
                         f"at node {idx}")
    v = axial_flow(grid) + state.u + bg.u0
    theta = bg.theta + state.eta
    return v, rho, theta


def perturbation_of(v, rho, theta, bg: Background, grid: Grid) -> FlowState:
    """Affine inverse of :func:`reconstruct_physical`."""
    return FlowState(np.asarray(v, dtype=float) - axial_flow(grid) - bg.u0,
                     np.asarray(rho, dtype=float) - 1.0,
                     np.asarray(theta, dtype=float) - bg.theta)


def picard_iterate(grid: Grid, data: ProblemData, params: FlowParams,
                   gas: GasModel, *, background: Background | None = None,
                   initial: FlowState | None = None, tol: float = 1e-10,
                   max_iter: int = 50, p: float = 2.0,
                   rho_floor: float = 0.1, inner_tol: float = 1e-11,
                   record_residuals: bool = True,
                   verbose: bool = False) -> tuple[FlowState, IterationReport]:
    """Successive approximations for the perturbation system.

    Stops when the weak-norm step ``delta_n`` drops below ``tol``.
    Divergence (strong norm exceeding ``10 A_1 + 1``, or the density
    leaving ``1 + sigma >= rho_floor``) raises :class:`DivergenceError`
    carrying the partial report; ratios ``q = delta_n / delta_{n-1}``
    at or above one from the third step on only warn.
    """
    if background is None:
        background = build_background(grid, data, params, gas)
    state = FlowState.zero(grid) if initial is None else initial
    d0 = data_size(data, grid, params, p)

    steps: list = []
    report = IterationReport(steps, False, d0, 0.0)
    a_first = None
    a_prev = strong_state_norm(state, grid, p)
    delta_prev = None
    warned = False

    for n in range(1, max_iter + 1):
        lp = assemble_FGH(state, background, data, params, gas, grid)
        new_state, info = solve_linear_step(grid, lp, params, gas,
                                            tol=inner_tol, initial=state)
        delta = weak_distance(new_state, state, grid)
        a_n = strong_state_norm(new_state, grid, p)
        state = new_state

        rec = {"n": n, "A": a_n, "delta": delta,
               "inner_sweeps": info.sweeps,
               "inner_increment": info.increment}
        if delta_prev is not None and delta_prev > 1e-14:
            rec["q"] = delta / delta_prev
            if n >= 3 and rec["q"] >= 1.0 and not warned:
                warnings.warn(
                    f"outer step {n}: increment ratio q = {rec['q']:.3f} >= 1",
                    RuntimeWarning, stacklevel=2)
                warned = True
        recursion = a_prev**2 + a_prev**3 + d0
        if recursion > 1e-300:
            rec["c_step"] = a_n / recursion
            report.constant = max(report.constant, rec["c_step"])
        steps.append(rec)
        if verbose:
            print(f"  step {n:2d}: A = {a_n:.6e}  delta = {delta:.3e}  "
                  f"sweeps = {info.sweeps}")

        # health checks come before the residual evaluation: a collapsed
        # iterate may not even reconstruct to a positive density
        if not np.isfinite(a_n):
            report.message = f"non-finite state norm at step {n}"
            raise DivergenceError(report.message, report)
        if float(np.min(1.0 + state.sigma)) < rho_floor:
            report.message = (f"density floor broken at step {n}: "
                              f"min(1 + sigma) < {rho_floor}")
            raise DivergenceError(report.message, report)
        if record_residuals:
            v, rho, theta = reconstruct_physical(state, background, grid)
            rec["residuals"] = residual_main_system(
                v, rho, theta, grid, data, params, gas).as_dict()
        a_first = a_n if a_first is None else a_first
        if a_n > 10.0 * a_first + 1.0:
            report.message = (f"norm blow-up at step {n}: "
                              f"A = {a_n:.3e} > 10 A_1 + 1")
            raise DivergenceError(report.message, report)

        if delta < tol:
            report.converged = True
            break
        a_prev = a_n
        delta_prev = delta

    if not report.converged:
        report.message = f"no fixed point within {max_iter} steps"
    return state, report


def uniqueness_probe(grid: Grid, data: ProblemData, params: FlowParams,
                     gas: GasModel, start_a: FlowState, start_b: FlowState,
                     **kwargs) -> float:
    """Weak-norm distance of the fixed points reached from two starts."""
    final_a, _ = picard_iterate(grid, data, params, gas, initial=start_a,
                                **kwargs)
    final_b, _ = picard_iterate(grid, data, params, gas, initial=start_b,
                                **kwargs)
    return weak_distance(final_a, final_b, grid)
