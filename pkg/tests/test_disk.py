import numpy as np
import pytest

from fbp_lab.disk import (GreenDisk, circle_points, disk_rect_overlap,
                          green_identity_residual, poisson_disk_eval,
                          square_log_integral)
from fbp_lab.errors import FbpError
from fbp_lab.grid import ScalarField, make_grid


def test_green_disk_values():
    ball = GreenDisk((0.5, -0.25), 0.4)
    ring = circle_points(ball.center, ball.r, 16)
    assert np.allclose(ball.value(ring), 0.0, atol=1e-12)
    inside = np.array([[0.5, -0.05]])
    assert ball.value(inside)[0] < 0
    assert ball.boundary_flux() == pytest.approx(1.0 / (2 * np.pi * 0.4))


def test_green_disk_pole_and_radius_errors():
    with pytest.raises(FbpError) as exc:
        GreenDisk((0.0, 0.0), 0.0)
    assert exc.value.code == "RADIUS_TOO_SMALL"
    ball = GreenDisk((0.0, 0.0), 1.0)
    with pytest.raises(FbpError) as exc:
        ball.value(np.array([[0.0, 0.0]]))
    assert exc.value.code == "POLE_EVALUATION"


def test_poisson_extension_of_constant_and_coordinate():
    # trace 1 extends to 1; trace cos(theta) extends to x
    x = np.array([[0.3, 0.2], [-0.1, 0.55], [0.0, 0.0]])
    ones = poisson_disk_eval(lambda th: np.ones_like(th), x)
    assert np.allclose(ones, 1.0, atol=1e-6)
    vals = poisson_disk_eval(np.cos, x)
    assert np.allclose(vals, x[:, 0], atol=1e-6)


def test_poisson_accepts_sample_array_and_checks_shape():
    th = 2 * np.pi * np.arange(256) / 256
    v = poisson_disk_eval(np.sin(th), np.array([0.0, 0.4]), M=256)
    assert v == pytest.approx(0.4, abs=1e-6)
    with pytest.raises(FbpError) as exc:
        poisson_disk_eval(np.sin(th), np.array([0.0, 0.4]), M=512)
    assert exc.value.code == "GRID_MISMATCH"


def test_poisson_point_must_be_interior():
    with pytest.raises(FbpError) as exc:
        poisson_disk_eval(lambda th: np.ones_like(th), np.array([1.0, 0.0]))
    assert exc.value.code == "POINT_NOT_INTERIOR"


def test_square_log_integral_against_riemann_sum():
    a = 0.5
    n = 4000   # even count keeps the midpoint grid off the origin
    xs = (np.arange(n) + 0.5) / n * 2 * a - a
    X, Y = np.meshgrid(xs, xs)
    approx = float(np.log(np.hypot(X, Y)).sum()) * (2 * a / n) ** 2
    assert square_log_integral(a) == pytest.approx(approx, abs=2e-4)


def test_green_identity_near_zero_for_harmonic_field():
    g = make_grid((-1, 1, -1, 1), 0.025)
    X, Y = g.mesh()
    fld = ScalarField(g, X ** 2 - Y ** 2)
    res = green_identity_residual(fld, (0.1, -0.2), 0.5)
    assert res < 5e-3


def test_green_identity_sees_poisson_mass():
    # u with discrete Laplacian 4 must show a nonzero area term
    g = make_grid((-1, 1, -1, 1), 0.025)
    X, Y = g.mesh()
    fld = ScalarField(g, X ** 2 + Y ** 2)
    res, terms = green_identity_residual(fld, (0.0, 0.0), 0.5, return_terms=True)
    assert res < 5e-3
    # area term = 4 * int G = 4 * (-r^2/4) = -r^2 for the unit-mass kernel
    assert terms["area_term"] == pytest.approx(-0.25, abs=5e-3)


def test_green_identity_radius_and_containment_errors():
    g = make_grid((-1, 1, -1, 1), 0.1)
    fld = ScalarField(g, np.zeros(g.shape))
    with pytest.raises(FbpError) as exc:
        green_identity_residual(fld, (0.0, 0.0), 0.3)
    assert exc.value.code == "RADIUS_TOO_SMALL"
    with pytest.raises(FbpError) as exc:
        green_identity_residual(fld, (0.8, 0.0), 0.4)
    assert exc.value.code == "BALL_OUTSIDE_GRID"


def test_disk_rect_overlap_exact_cases():
    R = 0.75
    full = np.pi * R * R
    assert disk_rect_overlap(R, -1, 1, -1, 1) == pytest.approx(full, abs=1e-12)
    assert disk_rect_overlap(R, 0, 1, 0, 1) == pytest.approx(full / 4, abs=1e-12)
    assert disk_rect_overlap(R, 2, 3, 2, 3) == pytest.approx(0.0, abs=1e-12)
    # half-plane split partitions the disk
    left = disk_rect_overlap(R, -2, 0.2, -2, 2)
    right = disk_rect_overlap(R, 0.2, 2, -2, 2)
    assert left + right == pytest.approx(full, abs=1e-12)


def test_disk_rect_overlap_broadcasts():
    R = 1.0
    x2 = np.array([0.0, 0.5, 1.0])
    out = disk_rect_overlap(R, -2.0, x2, -2.0, 2.0)
    assert out.shape == (3,)
    assert np.all(np.diff(out) > 0)
    assert out[0] == pytest.approx(np.pi / 2, abs=1e-12)
