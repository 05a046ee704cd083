"""Command-line front end.

Three subcommands share a TOML run configuration:

    nsf solve  <config>   background -> outer iteration -> artifacts
    nsf verify <config>   inequality suite against a frozen calibration
    nsf study  <config> --resolutions 16,32,64   manufactured-order table

Exit codes: 0 success (every registered verdict passed), 2 invalid
configuration, 3 the iteration left the small-perturbation regime,
4 the run completed but a verdict failed.

``summary.json`` is written with sorted keys and no timestamps, so a
repeated run of the same configuration reproduces it byte for byte.
``NSF_THREADS`` caps the linear-algebra thread pools.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np
import sympy as sym

from .background import build_background
from .config import ConfigError, RunConfig, build_problem_data, load_config
from .data import data_size
from .diagnostics import (calibrate, effective_transport_residual,
                          load_calibration, monitor, residual_main_system,
                          run_inequality_suite)
from .grid import Grid
from .manufactured import (X1, X2, LinearStepCase, ScalarCase, VectorCase,
                           fit_order)
from .picard import (DivergenceError, LinearProblemData, StagnationError,
                     assemble_FGH, picard_iterate, reconstruct_physical,
                     solve_linear_step, strong_state_norm)
from .transport import characteristic_oracle, march_transport

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_VERDICT = 4

# truncation allowance for the one-sided boundary-row stencils; the
# volume rows are exact identities at a converged step and get the
# tighter bound
VOLUME_RESIDUAL_BOUND = 1e-6
BOUNDARY_RESIDUAL_BOUND = 1e-3


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------


def _plain(obj):
    """Recursively strip numpy types so json output is reproducible."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")


def _write_jsonl(path: Path, rows) -> None:
    with path.open("w") as fh:
        for row in rows:
            fh.write(json.dumps(_plain(row), sort_keys=True) + "\n")


def _write_table(path: Path, header, columns) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v
                             for v in row])


def _node_columns(grid: Grid):
    x1, x2 = grid.coords
    return [x1.ravel(), x2.ravel()]


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def _solve_verdicts(report, residuals) -> dict:
    qs = [s["q"] for s in report.steps if "q" in s]
    return {
        "converged": bool(report.converged),
        "contraction_ratios_below_one": all(q < 1.0 for q in qs),
        "volume_residuals_small": residuals.volume_max <= VOLUME_RESIDUAL_BOUND,
        "boundary_residuals_small": max(
            residuals.slip, residuals.normal, residuals.heat,
            residuals.density) <= BOUNDARY_RESIDUAL_BOUND,
    }


def _background_section(bg) -> dict:
    return {
        "c_g": bg.c_g,
        "compat_defect": bg.compat_defect,
        "compat_multiplier": bg.compat_multiplier,
        "energy_residual_max": float(np.max(np.abs(bg.energy_residual))),
    }


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = Grid(cfg.channel, cfg.n)
    data = build_problem_data(cfg, grid)
    try:
        data.validate(grid)
    except ValueError as exc:
        raise ConfigError(f"assembled data is ill-posed: {exc}") from exc

    bg = build_background(grid, data, cfg.params, cfg.gas)
    base = {
        "config": cfg.raw,
        "grid": {"n": list(grid.n), "h": list(grid.h),
                 "length": grid.channel.length},
        "gas": cfg.gas.name,
        "background": _background_section(bg),
    }

    try:
        state, report = picard_iterate(
            grid, data, cfg.params, cfg.gas, background=bg, tol=cfg.tol,
            max_iter=cfg.max_iter, p=cfg.p, rho_floor=cfg.rho_floor,
            inner_tol=cfg.inner_tol)
    except DivergenceError as exc:
        report = exc.report
        if report is not None:
            _write_jsonl(out / "iterations.jsonl", report.steps)
            _write_json(out / "summary.json", {
                **base,
                "data_size": report.data_size,
                "iterations": report.n_steps,
                "converged": False,
                "diverged": True,
                "message": report.message,
            })
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except StagnationError as exc:
        print(f"inner iteration stalled: {exc}", file=sys.stderr)
        return EXIT_DIVERGED

    v, rho, theta = reconstruct_physical(state, bg, grid)
    residuals = residual_main_system(v, rho, theta, grid, data, cfg.params,
                                     cfg.gas)
    lp = assemble_FGH(state, bg, data, cfg.params, cfg.gas, grid)
    _, trans = effective_transport_residual(state.u, state.sigma, lp.U, lp.G,
                                            grid, cfg.params, cfg.gas)
    verdicts = _solve_verdicts(report, residuals)
    qs = [s["q"] for s in report.steps if "q" in s]

    summary = {
        **base,
        "data_size": report.data_size,
        "iterations": report.n_steps,
        "converged": report.converged,
        "max_q": max(qs) if qs else None,
        "iteration_constant": report.constant,
        "final": {
            "strong_norm": strong_state_norm(state, grid, cfg.p),
            "weak_increment": report.steps[-1]["delta"],
            "residuals": residuals.as_dict(),
            "effective_transport": {"l2": trans["l2"], "linf": trans["linf"]},
        },
        "verdicts": verdicts,
    }
    _write_json(out / "summary.json", summary)
    _write_jsonl(out / "iterations.jsonl", report.steps)

    nodes = _node_columns(grid)
    _write_table(out / "background.csv",
                 ["x1", "x2", "theta", "u0_1", "u0_2"],
                 nodes + [bg.theta.ravel(), bg.u0[0].ravel(),
                          bg.u0[1].ravel()])
    _write_table(out / "fields_final.csv",
                 ["x1", "x2", "v1", "v2", "rho", "theta", "sigma", "eta"],
                 nodes + [v[0].ravel(), v[1].ravel(), rho.ravel(),
                          theta.ravel(), state.sigma.ravel(),
                          state.eta.ravel()])

    failed = [k for k, ok in verdicts.items() if not ok]
    if failed:
        print("verdicts failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_VERDICT
    print(f"converged in {report.n_steps} steps; "
          f"D0 = {report.data_size:.6e}; artifacts in {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = Grid(cfg.channel, cfg.n)

    cal_path = Path(args.calibration) if args.calibration \
        else Path(args.config).with_name("calibration.json")
    if not cal_path.exists():
        raise ConfigError(f"no frozen calibration at {cal_path}")
    cal = load_calibration(cal_path)
    if list(cal.get("grid", [])) != list(grid.n):
        raise ConfigError(
            f"calibration grid {cal.get('grid')} does not match"
            f" configured grid {list(grid.n)}")
    if float(cal.get("p", -1.0)) != cfg.p:
        raise ConfigError(
            f"calibration exponent {cal.get('p')} != configured {cfg.p}")

    verdicts = run_inequality_suite(grid, cfg.params, cfg.gas, cfg.p, cal)
    _write_jsonl(out / "iterations.jsonl", [v.as_dict() for v in verdicts])
    n_failed = sum(not v.passed for v in verdicts)

    # re-measure on an unrelated family and flag drifting constants
    fresh = calibrate(grid, cfg.params, cfg.gas, cfg.p,
                      seed=int(cal["seed"]) + 1,
                      n_fields=args.fields, n_data=args.samples)
    flags = monitor(cal, fresh)
    worst = max(fresh["energy_estimate"]["samples"])
    median_ok = worst <= 10.0 * cal["energy_estimate"]["median"]

    summary = {
        "calibration": str(cal_path.name),
        "grid": {"n": list(grid.n)},
        "checks": len(verdicts),
        "failed": n_failed,
        "drift_flags": flags,
        "energy_samples_max": worst,
        "energy_median_frozen": cal["energy_estimate"]["median"],
        "verdicts": {
            "inequalities_hold": n_failed == 0,
            "constants_stable": not flags,
            "energy_samples_within_10x_median": median_ok,
        },
    }
    _write_json(out / "summary.json", summary)

    failed = [k for k, ok in summary["verdicts"].items() if not ok]
    if failed:
        print("verify failed: " + ", ".join(failed), file=sys.stderr)
        for flag in flags:
            print(f"  drift: {flag}", file=sys.stderr)
        return EXIT_VERDICT
    print(f"{len(verdicts)} inequality checks passed; constants stable")
    return EXIT_OK


# ---------------------------------------------------------------------------
# study
# ---------------------------------------------------------------------------


def _study_cases(cfg: RunConfig):
    """Manufactured families, each returning (grid shape, error) per n."""
    length = cfg.channel.length
    par = cfg.params
    smooth = sym.cos(sym.pi * X1 / length) * sym.cos(sym.pi * X2) \
        + X2**2 * X1 / length
    neumann = ScalarCase(smooth, length, kappa=2.0)
    robin = ScalarCase(smooth, length, kappa=par.kappa,
                       L={f: par.L for f in ("in", "out", "bottom", "top")},
                       convection=1.0)
    vec = VectorCase(
        u1=sym.sin(sym.pi * X1 / length) * (sym.cos(sym.pi * X2) + 2 * X2),
        u2=sym.sin(sym.pi * X2) * (1 + sym.cos(sym.pi * X1 / length)) / 2,
        length=length, mu=par.mu, beta=par.grad_div_momentum, conv=1.0,
        alpha=par.alpha)
    step = LinearStepCase(
        u1=vec.u1, u2=vec.u2,
        sigma=sym.cos(sym.pi * X2) * sym.exp(X1 / length) / 5,
        eta=sym.sin(sym.pi * X1 / length) * (X2**2 + 1) / 3,
        U1=sym.sin(sym.pi * X1 / length) * sym.cos(sym.pi * X2) / 5,
        U2=X2 * (1 - X2) * sym.sin(sym.pi * X1 / length) / 4,
        length=length, params=par, gas=cfg.gas)

    w = sym.sin(sym.pi * X2) * sym.cos(sym.pi * X1 / length) \
        + X2**2 * X1 / length
    a = 0.3 * sym.sin(sym.pi * X2) * (1 + X1 / (2 * length))
    q = sym.diff(w, X1) + a * sym.diff(w, X2)
    fw, fa, fq = (sym.lambdify((X1, X2), e, modules="numpy")
                  for e in (w, a, q))

    def run_neumann(grid):
        from .elliptic import solve_neumann_poisson
        res = solve_neumann_poisson(grid, neumann.volume_rhs(grid),
                                    neumann.flux_data(grid), kappa=2.0,
                                    mean=neumann.mean())
        return float(np.max(np.abs(res.field - neumann.exact(grid))))

    def run_robin(grid):
        from .elliptic import solve_robin_scalar
        sol = solve_robin_scalar(grid, robin.volume_rhs(grid),
                                 robin.robin_data(grid), kappa=par.kappa,
                                 L=robin.L, convection=1.0)
        return float(np.max(np.abs(sol - robin.exact(grid))))

    def run_lame(grid):
        from .elliptic import solve_lame
        sol = solve_lame(grid, vec.force(grid), vec.slip_data(grid),
                         mu=par.mu, lam=par.lam,
                         grad_div=par.grad_div_momentum, convection=1.0,
                         alpha=par.alpha)
        return float(np.max(np.abs(sol - vec.exact(grid))))

    def _step_state(grid):
        lp = LinearProblemData(
            F=step.force(grid), G=step.continuity_rhs(grid),
            H=step.energy_rhs(grid), B=step.slip_data(grid),
            sigma_in=step.sigma_inflow(grid), U=step.drift(grid))
        state, info = solve_linear_step(
            grid, lp, par, cfg.gas, eta_robin_data=step.eta_robin_data(grid))
        if not info.converged:
            raise RuntimeError(f"inner sweeps stalled on grid {grid.n}")
        return lp, state

    def run_step(grid):
        _, state = _step_state(grid)
        ue, se, ee = step.exact(grid)
        return float(np.max(np.abs(state.u - ue))
                     + np.max(np.abs(state.sigma - se))
                     + np.max(np.abs(state.eta - ee)))

    def run_trans(grid):
        lp, state = _step_state(grid)
        _, stats = effective_transport_residual(
            state.u, state.sigma, lp.U, lp.G, grid, par, cfg.gas)
        return stats["l2"]

    def run_transport(grid):
        x1, x2 = grid.coords
        inflow = fw(0.0 * grid.axes[1], grid.axes[1])
        marched = march_transport(grid, fa(x1, x2), fq(x1, x2), inflow)
        oracle = characteristic_oracle(grid, lambda x, z: fa(x, z),
                                       lambda x, z: fq(x, z), inflow)
        return float(np.max(np.abs(marched - oracle)))

    return {
        "neumann": (lambda n: (n, n), run_neumann),
        "robin": (lambda n: (n, n), run_robin),
        "lame": (lambda n: (n, n), run_lame),
        "coupled_step": (lambda n: (n, max(2, n // 2)), run_step),
        "trans_identity": (lambda n: (n, max(2, n // 2)), run_trans),
        "transport_oracle": (lambda n: (2 * n, n), run_transport),
    }


def cmd_study(args) -> int:
    cfg = load_config(args.config)
    try:
        sizes = [int(tok) for tok in args.resolutions.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad --resolutions: {exc}") from exc
    if len(sizes) < 3 or any(n < 4 for n in sizes):
        raise ConfigError("need at least 3 resolutions, all >= 4")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    orders = {}
    for name, (shape_of, runner) in _study_cases(cfg).items():
        hs, errs, shapes = [], [], []
        for n in sizes:
            grid = Grid(cfg.channel, shape_of(n))
            errs.append(runner(grid))
            hs.append(max(grid.h))
            shapes.append(grid.n)
        orders[name] = fit_order(hs, errs)
        rows.extend(
            [name, n1, n2, f"{h:.17g}", f"{e:.17g}", f"{orders[name]:.4f}"]
            for (n1, n2), h, e in zip(shapes, hs, errs))

    with (out / "study.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["case", "n1", "n2", "h", "error", "fitted_order"])
        writer.writerows(rows)
    _write_json(out / "summary.json",
                {"resolutions": sizes, "fitted_orders": orders})

    width = max(len(k) for k in orders)
    for name, slope in orders.items():
        print(f"{name:<{width}}  order {slope:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsf",
        description="steady channel-flow solver and estimate checker")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run the outer iteration")
    solve.add_argument("config")
    solve.add_argument("--out-dir", default="nsf-out")
    solve.set_defaults(func=cmd_solve)

    verify = sub.add_parser("verify",
                            help="inequality suite vs frozen calibration")
    verify.add_argument("config")
    verify.add_argument("--out-dir", default="nsf-out")
    verify.add_argument("--calibration", default=None,
                        help="frozen constants (default: calibration.json "
                             "next to the config)")
    verify.add_argument("--fields", type=int, default=40,
                        help="fresh random fields for the drift re-measure")
    verify.add_argument("--samples", type=int, default=8,
                        help="fresh linear-step samples")
    verify.set_defaults(func=cmd_verify)

    study = sub.add_parser("study", help="manufactured convergence table")
    study.add_argument("config")
    study.add_argument("--resolutions", default="16,32,64")
    study.add_argument("--out-dir", default="nsf-out")
    study.set_defaults(func=cmd_study)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    limit = os.environ.get("NSF_THREADS")
    try:
        if limit:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=int(limit)):
                return args.func(args)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
