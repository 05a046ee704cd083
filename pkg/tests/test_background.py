"""Reference-state checks: the boundary-mean source, both temperature
solves, the deliberately kept Neumann incompatibility, and the gradient
lift.

The interior-residual test pins the one surprise of the construction:
with the plus-sign source convention the assembled temperature leaves the
constant ``-2 c_g`` in the reduced energy balance at interior nodes, and
it does so at factorization precision because solver and evaluator share
the centered stencils there.
"""

import warnings

import numpy as np
import pytest
from dataclasses import replace

from nsfchannel.background import (
    background_energy_residual,
    build_background,
    build_lift,
    compute_cg,
    solve_theta0,
    solve_theta1,
)
from nsfchannel.constitutive import FlowParams, GasModel
from nsfchannel.data import ProblemData
from nsfchannel.grid import Channel, Grid, curl2d
from nsfchannel.manufactured import fit_order

L_CH = 2.0


def make_grid(n1, n2, length=L_CH):
    return Grid(Channel(length, 2), (n1, n2))


def face_zeros(g):
    return {f.name: np.zeros(g.face_coords(f)[0].shape) for f in g.faces}


# ---------------------------------------------------------------------------
# boundary-mean source
# ---------------------------------------------------------------------------


def test_boundary_mean_source_frozen_examples():
    g = make_grid(12, 8)
    ends = {name: np.full(g.face_coords(name)[0].shape, 0.7)
            for name in ("in", "out")}
    # (0.7 * 1 + 0.7 * 1) / |Omega| with |Omega| = 2
    assert compute_cg(g, ends) == pytest.approx(0.7, abs=1e-13)

    unit = make_grid(8, 8, length=1.0)
    x2 = unit.face_coords("in")[1]
    assert compute_cg(unit, {"in": x2}) == pytest.approx(0.5, abs=1e-13)

    assert compute_cg(g, face_zeros(g)) == 0.0
    assert compute_cg(g, None) == 0.0


# ---------------------------------------------------------------------------
# Neumann part
# ---------------------------------------------------------------------------


def test_theta0_zero_flux_is_reference_constant():
    g = make_grid(10, 6)
    res = solve_theta0(g, face_zeros(g), kappa=3.0, T0=5.0)
    assert np.max(np.abs(res.field - 5.0)) < 1e-11
    assert abs(res.defect) < 1e-13
    assert abs(res.multiplier) < 1e-13


def test_theta0_reports_incompatibility_of_the_plus_sign():
    g = make_grid(16, 8)
    flux = {f.name: np.full(g.face_coords(f)[0].shape, 0.3) for f in g.faces}
    res = solve_theta0(g, flux, kappa=2.0, T0=1.0)
    # |Gamma| = 2*2 + 2*1 = 6, |Omega| = 2: c_g = 0.9, raw defect 2 c_g |Omega|
    assert res.defect == pytest.approx(3.6, abs=1e-12)
    assert res.multiplier == pytest.approx(1.8, abs=1e-12)
    assert res.mean == pytest.approx(1.0, abs=1e-12)


def test_theta0_deviation_scales_like_inverse_kappa():
    g = make_grid(16, 8)
    x1 = g.face_coords("bottom")[0]
    flux = {"bottom": np.sin(np.pi * x1 / L_CH)}
    res1 = solve_theta0(g, flux, kappa=1.0, T0=2.0)
    res2 = solve_theta0(g, flux, kappa=2.0, T0=2.0)
    dev1, dev2 = res1.field - 2.0, res2.field - 2.0
    scale = np.max(np.abs(dev1))
    assert scale > 1e-3  # the datum actually does something
    assert np.max(np.abs(dev1 - 2.0 * dev2)) < 1e-10 * scale
    assert res1.mean == pytest.approx(2.0, abs=1e-12)
    assert res2.mean == pytest.approx(2.0, abs=1e-12)


# ---------------------------------------------------------------------------
# Robin correction
# ---------------------------------------------------------------------------


def test_theta1_homogeneous_data_gives_zero():
    g = make_grid(10, 6)
    gas = GasModel.ideal(1.0, 4.0)
    params = FlowParams(kappa=2.0, L=1.5)
    t1 = solve_theta1(g, np.full(g.shape, gas.T0), params, gas)
    assert np.max(np.abs(t1)) < 1e-12


def test_theta1_rejects_vanishing_exchange():
    g = make_grid(8, 4)
    gas = GasModel.ideal(1.0, 1.0)
    params = FlowParams(kappa=1.0, L=0.0)
    with pytest.raises(ValueError, match="singular"):
        solve_theta1(g, np.full(g.shape, 1.0), params, gas)


def test_theta1_constant_wall_exchange_is_exact():
    # constant wanted trace + zero source: the constant solves the whole
    # problem for every L, so the large-L limit is attained outright
    g = make_grid(16, 8)
    gas = GasModel.ideal(1.0, 2.0)
    params = FlowParams(kappa=5.0, L=1.0)
    theta0 = np.full(g.shape, gas.T0)
    T1 = {name: np.full(g.face_coords(name)[0].shape, 0.4)
          for name in ("bottom", "top")}
    for weight in (1e2, 1e4):
        t1 = solve_theta1(g, theta0, params, gas, T1=T1,
                          L={"bottom": weight, "top": weight})
        assert np.max(np.abs(t1 - 0.4)) < 1e-10


def test_theta1_wall_trace_approaches_varying_datum():
    g = make_grid(32, 16)
    gas = GasModel.ideal(1.0, 2.0)
    params = FlowParams(kappa=1.0, L=1.0)
    theta0 = np.full(g.shape, gas.T0)
    x1 = g.face_coords("bottom")[0]
    wanted = 0.4 * (1.0 + 0.5 * np.cos(np.pi * x1 / L_CH))
    T1 = {"bottom": wanted, "top": np.zeros_like(wanted)}
    errs = []
    for weight in (1e2, 1e3, 1e4):
        t1 = solve_theta1(g, theta0, params, gas, T1=T1,
                          L={"bottom": weight, "top": weight})
        errs.append(np.max(np.abs(t1[:, 0] - wanted)))
    assert errs[0] > errs[1] > errs[2]
    # Robin mismatch is (kappa/L) * normal flux, one decade of L per step
    assert errs[0] / errs[2] > 30.0


def test_theta1_manufactured_recovery_second_order():
    kappa, weight = 1.0, 2.0
    gas = GasModel.ideal(1.0, 1.0)  # r0 = 1
    params = FlowParams(kappa=kappa, L=weight)
    r0 = gas.r0
    # decaying separable solution of r0 t_x = kappa Lap t, so the internal
    # source of the correction solve (zero here) is matched exactly
    m = (r0 - np.sqrt(r0 * r0 + 4.0 * kappa * kappa * np.pi * np.pi)) / (2 * kappa)

    def exact(g):
        x, y = g.coords
        return np.exp(m * x) * np.cos(np.pi * y)

    errs, hs = [], []
    for n in (16, 32, 64):
        g = make_grid(n, n // 2)
        y_end = g.face_coords("in")[1]
        x_wall = g.face_coords("bottom")[0]
        T1 = {
            "in": (1.0 - kappa * m / weight) * np.cos(np.pi * y_end),
            "out": (1.0 + kappa * m / weight) * np.exp(m * L_CH) * np.cos(np.pi * y_end),
            "bottom": np.exp(m * x_wall),
            "top": -np.exp(m * x_wall),
        }
        t1 = solve_theta1(g, np.full(g.shape, gas.T0), params, gas, T1=T1)
        errs.append(np.max(np.abs(t1 - exact(g))))
        hs.append(max(g.h))
    order = fit_order(hs, errs)
    assert 1.7 <= order <= 2.3, f"fitted order {order:.2f}"


def test_theta1_size_warning_wiring():
    g = make_grid(16, 8)
    gas = GasModel.ideal(1.0, 2.0)
    params = FlowParams(kappa=50.0, L=50.0)
    x1 = g.face_coords("bottom")[0]
    T1 = {"bottom": 0.1 * np.sin(np.pi * x1 / L_CH)}
    with pytest.warns(RuntimeWarning, match="exceeds"):
        solve_theta1(g, np.full(g.shape, gas.T0), params, gas, T1=T1,
                     warn_factor=1e-8)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        solve_theta1(g, np.full(g.shape, gas.T0), params, gas, T1=T1)


# ---------------------------------------------------------------------------
# gradient lift
# ---------------------------------------------------------------------------


def test_lift_of_the_axial_datum_is_the_axial_flow():
    g = make_grid(16, 8)
    shape_end = g.face_coords("in")[0].shape
    shape_wall = g.face_coords("bottom")[0].shape
    datum = {
        "in": -np.ones(shape_end),
        "out": np.ones(shape_end),
        "bottom": np.zeros(shape_wall),
        "top": np.zeros(shape_wall),
    }
    lift = build_lift(g, datum)
    assert abs(lift.source_constant) < 1e-14
    assert abs(lift.defect) < 1e-12
    assert np.max(np.abs(lift.u0[0] - 1.0)) < 1e-10
    assert np.max(np.abs(lift.u0[1])) < 1e-10
    x1 = g.coords[0]
    assert np.max(np.abs(lift.phi - (x1 - 1.0))) < 1e-10


def test_lift_zero_datum_is_zero():
    g = make_grid(8, 4)
    lift = build_lift(g, face_zeros(g))
    assert lift.source_constant == 0.0
    assert np.max(np.abs(lift.u0)) < 1e-12


def test_lift_generic_datum_compatible_linear_and_curl_free():
    g = make_grid(16, 8)
    y = g.face_coords("in")[1]
    shape_wall = g.face_coords("bottom")[0].shape
    datum = {
        "in": 0.3 * np.cos(np.pi * y),
        "out": np.full(y.shape, 0.1),
        "bottom": np.zeros(shape_wall),
        "top": np.zeros(shape_wall),
    }
    lift = build_lift(g, datum)
    # trapezoid of the full cosine period cancels exactly, so only the
    # outflow constant feeds the source: 0.1 * 1 / |Omega|
    assert lift.source_constant == pytest.approx(0.05, abs=1e-13)
    assert abs(lift.defect) < 1e-12

    scaled = build_lift(g, {k: 3.0 * v for k, v in datum.items()})
    assert np.max(np.abs(scaled.u0 - 3.0 * lift.u0)) < 1e-10

    assert np.max(np.abs(curl2d(lift.u0, g))) < 1e-11


def test_lift_normal_trace_converges_to_datum():
    def datum_of(g):
        y = g.face_coords("in")[1]
        shape_wall = g.face_coords("bottom")[0].shape
        return {
            "in": -0.2 * np.sin(np.pi * y) ** 2,
            "out": 0.3 * np.sin(np.pi * y) ** 2,
            "bottom": np.zeros(shape_wall),
            "top": np.zeros(shape_wall),
        }

    errs = []
    for n in (16, 32):
        g = make_grid(n, n // 2)
        lift = build_lift(g, datum_of(g))
        datum = datum_of(g)
        err = max(
            np.max(np.abs(-lift.u0[0][0, :] - datum["in"])),
            np.max(np.abs(lift.u0[0][-1, :] - datum["out"])),
            np.max(np.abs(-lift.u0[1][:, 0] - datum["bottom"])),
            np.max(np.abs(lift.u0[1][:, -1] - datum["top"])),
        )
        errs.append(err)
    assert np.log2(errs[0] / errs[1]) > 0.9


# ---------------------------------------------------------------------------
# assembled reference state
# ---------------------------------------------------------------------------


def test_build_background_of_background_data_is_trivial():
    g = make_grid(16, 8)
    gas = GasModel.ideal(1.0, 2.0)
    params = FlowParams(kappa=2.0, L=3.0)
    data = ProblemData.background(g, params)
    bg = build_background(g, data, params, gas)
    assert bg.c_g == 0.0
    assert np.max(np.abs(bg.theta - gas.T0)) < 1e-11
    assert np.max(np.abs(bg.u0)) < 1e-10
    assert np.max(np.abs(bg.energy_residual)) < 1e-9
    assert abs(bg.compat_defect) < 1e-12


def test_background_interior_defect_is_minus_two_cg():
    g = make_grid(16, 8)
    gas = GasModel.ideal(1.0, 2.0)
    params = FlowParams(kappa=2.0, L=3.0)
    data = ProblemData.background(g, params)
    flux = {f.name: np.full(g.face_coords(f)[0].shape, 0.25) for f in g.faces}
    data = replace(data, g=flux)
    bg = build_background(g, data, params, gas)

    c_g = 0.25 * 6.0 / 2.0
    assert bg.c_g == pytest.approx(c_g, abs=1e-13)
    assert bg.compat_defect == pytest.approx(2 * c_g * 2.0, abs=1e-12)
    assert bg.compat_multiplier == pytest.approx(2 * c_g, abs=1e-12)

    # solver and evaluator share the centered interior stencils, so the
    # as-written source constant shows up exactly, not just to O(h^2)
    interior = bg.energy_residual[1:-1, 1:-1]
    assert np.max(np.abs(interior + 2 * c_g)) < 1e-8

    recomputed = background_energy_residual(g, bg.theta,
                                            kappa=params.kappa, r0=gas.r0)
    assert np.array_equal(recomputed, bg.energy_residual)
