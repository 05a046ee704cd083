"""Acceptance gate: one test per shipped guarantee, in order.

Each test is a single pass/fail line under ``pytest -v``.  The suite
runs the bundled configurations through the installed command line and
re-checks the library-level claims on desk-scale grids (nothing above
64x32, every test well under a minute).
"""

import dataclasses
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from nsfchannel import (FlowParams, GasModel, load_config,
                        build_problem_data, picard_iterate)
from nsfchannel.grid import Channel, Grid
from nsfchannel.picard import FlowState, strong_state_norm, uniqueness_probe
from nsfchannel.transport import trace_characteristics

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SMALL = CONFIGS / "small_data.toml"


def run_cli(*args, env_extra=None, cwd=None):
    env = dict(os.environ)
    env.update(env_extra or {})
    return subprocess.run(
        [sys.executable, "-m", "nsfchannel.cli", *map(str, args)],
        capture_output=True, text=True, env=env, cwd=cwd)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    proc = run_cli("solve", SMALL, "--out-dir", out)
    assert proc.returncode == 0, proc.stderr
    return out, json.loads((out / "summary.json").read_text())


@pytest.fixture(scope="module")
def study_orders(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    proc = run_cli("study", SMALL, "--resolutions", "16,32,64",
                   "--out-dir", out)
    assert proc.returncode == 0, proc.stderr
    return json.loads((out / "summary.json").read_text())["fitted_orders"]


# ---------------------------------------------------------------------------


def test_01_background_data_is_an_exact_one_step_fixed_point(tmp_path):
    proc = run_cli("solve", CONFIGS / "background_only.toml",
                   "--out-dir", tmp_path)
    assert proc.returncode == 0, proc.stderr
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["data_size"] == 0.0
    assert summary["iterations"] == 1
    assert max(summary["final"]["residuals"].values()) <= 1e-10


def test_02_elliptic_solvers_and_coupled_step_converge_at_order(study_orders):
    for case in ("neumann", "robin", "lame"):
        assert 1.7 <= study_orders[case] <= 2.3, (case, study_orders[case])
    assert study_orders["coupled_step"] >= 0.9


def test_03_transport_marching_matches_the_characteristic_oracle(study_orders):
    assert study_orders["transport_oracle"] >= 0.9
    # closed-form check of the curve tracer on a logistic drift
    g = Grid(Channel(2.0, 2), (64, 32))
    eps = 0.1
    lines = trace_characteristics(g, lambda x, z: eps * z * (1 - z))
    z0 = g.axes[1][None, :]
    exact = z0 / (z0 + (1 - z0) * np.exp(-eps * g.axes[0][:, None]))
    assert np.max(np.abs(lines - exact)) < 1e-8


def test_04_small_data_iteration_contracts(small_run):
    out, summary = small_run
    assert summary["converged"]
    assert summary["iterations"] <= 50
    assert summary["final"]["weak_increment"] < 1e-10
    ratios = [json.loads(line).get("q")
              for line in (out / "iterations.jsonl").read_text().splitlines()]
    recorded = [q for q in ratios if q is not None]
    assert recorded and all(q < 1.0 for q in recorded)
    assert summary["max_q"] == max(recorded)


def test_05_halving_the_data_scale_halves_the_response():
    cfg = load_config(SMALL)
    grid = Grid(cfg.channel, cfg.n)
    norms = []
    for scale in (cfg.data.scale, cfg.data.scale / 2.0):
        spec = dataclasses.replace(cfg.data, scale=scale)
        data = build_problem_data(dataclasses.replace(cfg, data=spec), grid)
        state, report = picard_iterate(grid, data, cfg.params, cfg.gas,
                                       p=cfg.p, record_residuals=False)
        assert report.converged
        norms.append(strong_state_norm(state, grid, cfg.p))
    assert abs(norms[0] / norms[1] - 2.0) <= 0.1


def test_06_two_starts_reach_the_same_fixed_point():
    cfg = load_config(SMALL)
    grid = Grid(cfg.channel, cfg.n)
    data = build_problem_data(cfg, grid)
    x1, x2 = grid.coords
    bump = 0.1 * np.sin(np.pi * x1 / grid.channel.length)
    start = FlowState(
        u=np.stack([bump * (1 + x2), bump * np.sin(np.pi * x2)]),
        sigma=0.1 * np.cos(np.pi * x2), eta=bump * x2**2)
    gap = uniqueness_probe(grid, data, cfg.params, cfg.gas,
                           FlowState.zero(grid), start, p=cfg.p,
                           record_residuals=False)
    assert gap <= 1e-8


def test_07_inequality_suite_passes_frozen_calibration(tmp_path):
    proc = run_cli("verify", SMALL, "--out-dir", tmp_path)
    assert proc.returncode == 0, proc.stderr
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["failed"] == 0
    assert summary["drift_flags"] == []
    assert summary["energy_samples_max"] \
        <= 10.0 * summary["energy_median_frozen"]


def test_08_density_identity_residual_vanishes_under_refinement(study_orders):
    assert study_orders["trans_identity"] >= 0.9


def test_09_summary_is_byte_identical_across_runs_and_threads(tmp_path):
    outputs = []
    for name, env in (("a", {}), ("b", {}), ("t1", {"NSF_THREADS": "1"}),
                      ("t4", {"NSF_THREADS": "4"})):
        out = tmp_path / name
        proc = run_cli("solve", SMALL, "--out-dir", out, env_extra=env)
        assert proc.returncode == 0, proc.stderr
        outputs.append((out / "summary.json").read_bytes())
    assert all(blob == outputs[0] for blob in outputs[1:])


# -- command-line contract ---------------------------------------------------


def test_cli_rejects_a_low_norm_exponent(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[iteration]\np = 2.5\n")
    proc = run_cli("solve", bad, "--out-dir", tmp_path / "out")
    assert proc.returncode == 2
    assert "p > 3" in proc.stderr


def test_cli_reports_divergence_with_partial_history(tmp_path):
    proc = run_cli("solve", CONFIGS / "large_data.toml",
                   "--out-dir", tmp_path)
    assert proc.returncode == 3
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["diverged"] and not summary["converged"]
    assert "density floor" in summary["message"]
    assert (tmp_path / "iterations.jsonl").read_text().strip()


def test_cli_study_needs_three_resolutions(tmp_path):
    proc = run_cli("study", SMALL, "--resolutions", "16,32",
                   "--out-dir", tmp_path)
    assert proc.returncode == 2
