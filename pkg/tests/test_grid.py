"""Grid geometry, quadrature and stencil checks.

Reference values here are small enough to do by hand: trapezoid sums of
polynomials, face areas of a box, and the node-ownership counts of a
tensor grid.
"""

import numpy as np
import pytest

from nsfchannel.grid import (
    Channel,
    Grid,
    curl2d,
    diff,
    diff2,
    divergence,
    grad_matrix,
    gradient,
    laplacian,
)


def test_build_grid_default_channel():
    g = Grid(Channel(2.0, 2), (8, 4))
    assert g.shape == (9, 5)
    assert g.h == (0.25, 0.25)
    assert g.channel.volume == 2.0
    # trapezoid weights reproduce the measures exactly
    assert g.integrate(np.ones(g.shape)) == pytest.approx(2.0, abs=1e-14)
    assert g.face_measure("in") == pytest.approx(1.0, abs=1e-14)
    assert g.face_measure("out") == pytest.approx(1.0, abs=1e-14)
    assert g.patch_measure("walls") == pytest.approx(4.0, abs=1e-14)


def test_build_grid_3d_measures():
    g = Grid(Channel(2.0, 3), (8, 4, 4))
    assert g.shape == (9, 5, 5)
    assert g.channel.volume == 2.0
    assert g.integrate(np.ones(g.shape)) == pytest.approx(2.0, abs=1e-13)
    # four lateral faces of area l*1 = 2 each
    assert g.patch_measure("walls") == pytest.approx(8.0, abs=1e-13)
    assert g.face_measure("in") == pytest.approx(1.0, abs=1e-14)


def test_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        Grid(Channel(2.0, 2), (8,))
    with pytest.raises(ValueError):
        Grid(Channel(2.0, 2), (1, 4))
    with pytest.raises(ValueError):
        Channel(-1.0, 2)
    with pytest.raises(ValueError):
        Channel(1.0, 4)


def test_trapezoid_exact_for_linear():
    g = Grid(Channel(2.0, 2), (8, 4))
    x1, x2 = g.coords
    # int_0^2 int_0^1 x1 dx = 2 exactly; trapezoid is exact on linears
    assert g.integrate(x1) == pytest.approx(2.0, abs=1e-13)
    assert g.integrate(x2) == pytest.approx(1.0, abs=1e-13)
    assert g.integrate_face("in", g.face_coords("in")[1]) == pytest.approx(0.5, abs=1e-14)


def test_owner_partition_and_priority():
    g = Grid(Channel(2.0, 2), (8, 4))
    masks = g.owner_masks
    total = sum(int(m.sum()) for m in masks.values())
    boundary = 2 * 9 + 2 * 5 - 4
    assert total == boundary
    # no overlaps
    assert not np.any(masks["in"] & masks["out"])
    assert not np.any(masks["in"] & masks["walls"])
    assert not np.any(masks["out"] & masks["walls"])
    # corners on x1=0 belong to the inflow patch, x1=l corners to outflow
    assert masks["in"][0, 0] and masks["in"][0, -1]
    assert masks["out"][-1, 0] and masks["out"][-1, -1]
    assert int(masks["in"].sum()) == 5
    assert int(masks["out"].sum()) == 5
    assert int(masks["walls"].sum()) == boundary - 10


def test_face_frames():
    g = Grid(Channel(2.0, 2), (8, 4))
    assert g.face("in").normal == (-1.0, 0.0)
    assert g.face("out").normal == (1.0, 0.0)
    assert g.face("bottom").normal == (0.0, -1.0)
    assert g.face("top").normal == (0.0, 1.0)
    # the streamwise component of the tangent frame: 0 on in/out, 1 on walls
    assert g.face("in").tangents == ((0.0, 1.0),)
    assert g.face("bottom").tangents == ((1.0, 0.0),)


def test_diff_exact_on_quadratics():
    g = Grid(Channel(2.0, 2), (10, 6))
    x1, x2 = g.coords
    f = 3.0 * x1**2 - x1 + 2.0 * x2**2 + x1 * x2
    np.testing.assert_allclose(diff(f, 0, g.h[0]), 6 * x1 - 1 + x2, atol=1e-12)
    np.testing.assert_allclose(diff(f, 1, g.h[1]), 4 * x2 + x1, atol=1e-12)


def test_diff2_exact_on_cubics():
    g = Grid(Channel(2.0, 2), (10, 6))
    x1, _ = g.coords
    f = x1**3
    np.testing.assert_allclose(diff2(f, 0, g.h[0]), 6 * x1, atol=1e-10)


def test_vector_calculus_consistency():
    g = Grid(Channel(2.0, 2), (12, 8))
    x1, x2 = g.coords
    u = np.stack([x1 * x2, x1 - x2**2])
    np.testing.assert_allclose(divergence(u, g), x2 - 2 * x2, atol=1e-12)
    np.testing.assert_allclose(curl2d(u, g), 1 - x1, atol=1e-12)
    grad = gradient(x1 * x2, g)
    np.testing.assert_allclose(grad[0], x2, atol=1e-12)
    np.testing.assert_allclose(grad[1], x1, atol=1e-12)
    np.testing.assert_allclose(laplacian(x1**2 + x2**2, g), 4.0, atol=1e-10)


def test_grad_matrix_matches_diff():
    g = Grid(Channel(2.0, 2), (9, 5))
    rng = np.random.default_rng(7)
    f = rng.standard_normal(g.shape)
    for axis in (0, 1):
        applied = (grad_matrix(g, axis) @ f.ravel()).reshape(g.shape)
        np.testing.assert_allclose(applied, diff(f, axis, g.h[axis]), atol=1e-12)


def test_extensions():
    g = Grid(Channel(1.0, 2), (4, 3))
    x1, x2 = g.coords
    even = g.extend(x1**2, axis=0, parity="even")
    odd = g.extend(x1, axis=0, parity="odd")
    gd = g.doubled(0)
    assert even.shape == gd.shape
    # doubled grid coordinates are [0, 2l]; the extension of x1^2 about the
    # shared node equals (x - l)^2 there
    y1, _ = gd.coords
    np.testing.assert_allclose(even, (y1 - 1.0) ** 2, atol=1e-14)
    np.testing.assert_allclose(odd, y1 - 1.0, atol=1e-14)


def test_mean_convention():
    # integrate/measure gives the mean used by the compatibility shifts
    g = Grid(Channel(2.0, 2), (8, 4))
    x1, _ = g.coords
    mean = g.integrate(x1) / g.channel.volume
    assert mean == pytest.approx(1.0, abs=1e-13)
