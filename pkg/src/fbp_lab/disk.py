"""Disk tools: Green function, Poisson kernel, circle quadrature.

All circle integrals use trapezoidal (= periodic rectangle) quadrature
with M uniform angles; area integrals on grids use midpoint quadrature
with one value per h-square cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FbpError, require
from .grid import ScalarField
from .operators import laplacian_stencil


def circle_sample_count(r: float, h: float) -> int:
    """Quadrature point count for a circle of radius r on an h-grid."""
    return max(64, int(np.ceil(2 * np.pi * r / h)))


def circle_points(center, r: float, M: int) -> np.ndarray:
    """(M, 2) points at uniform angles, starting at angle 0."""
    th = 2 * np.pi * np.arange(M) / M
    return np.column_stack((center[0] + r * np.cos(th), center[1] + r * np.sin(th)))


@dataclass(frozen=True)
class GreenDisk:
    """Green function of B_r(center) with pole at the center.

    G(y) = ln(|y - center| / r) / (2 pi): nonpositive in the ball, zero
    on the circle, outward normal derivative 1/(2 pi r) on the circle.
    """

    center: tuple[float, float]
    r: float

    def __post_init__(self):
        require(self.r > 0, "RADIUS_TOO_SMALL", f"ball radius must be positive, got {self.r}")

    def value(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])
        if np.any(d < 1e-12 * self.r):
            raise FbpError("POLE_EVALUATION", "Green function evaluated at its pole")
        return np.log(d / self.r) / (2 * np.pi)

    def boundary_flux(self) -> float:
        """Outward normal derivative on the circle (constant)."""
        return 1.0 / (2 * np.pi * self.r)


def green_value_and_flux(ball: GreenDisk, points: np.ndarray) -> tuple[np.ndarray, float]:
    """Values of the Green function at points, and the circle flux."""
    return ball.value(points), ball.boundary_flux()


def poisson_disk_eval(trace, x, M: int = 2048) -> np.ndarray:
    """Harmonic extension of a boundary trace into the unit disk.

    trace: callable on an array of angles, or an array of M samples at
    angles 2 pi k / M.  x: point or (N, 2) array with |x| < 1.  Uses the
    normalized kernel (1 - |x|^2) / (2 pi |x - y|^2), so trace == 1
    extends to 1 up to quadrature error.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    rho = np.hypot(pts[:, 0], pts[:, 1])
    require(bool(np.all(rho < 1.0)), "POINT_NOT_INTERIOR",
            "Poisson evaluation point must lie strictly inside the unit disk")
    th = 2 * np.pi * np.arange(M) / M
    if callable(trace):
        phi = np.asarray(trace(th), dtype=float)
    else:
        phi = np.asarray(trace, dtype=float)
        if phi.shape != (M,):
            raise FbpError("GRID_MISMATCH",
                           f"trace sample array has shape {phi.shape}, expected ({M},)")
    y = np.column_stack((np.cos(th), np.sin(th)))
    d2 = ((pts[:, None, :] - y[None, :, :]) ** 2).sum(axis=2)
    kernel = (1.0 - rho[:, None] ** 2) / (2 * np.pi * d2)
    out = (2 * np.pi / M) * (kernel * phi[None, :]).sum(axis=1)
    return out[0] if np.ndim(x) == 1 else out


def square_log_integral(a: float) -> float:
    """Exact integral of ln|y| over the square [-a, a]^2."""
    return 2 * a * a * (np.log(2 * a * a) - 3.0 + np.pi / 2.0)


def green_identity_residual(fld: ScalarField, center, r: float,
                            return_terms: bool = False):
    """Defect of u(c) = circle mean + integral of G * (discrete Laplacian).

    The circle term uses trapezoid quadrature with M = max(64, 2 pi r/h)
    samples of the bilinear interpolant; the area term uses midpoint cell
    quadrature of G * Lap(u) over cells inside the ball, with the pole
    cell's G replaced by its exact average over the h-square.
    """
    g = fld.grid
    h = g.h
    require(r >= 4 * h, "RADIUS_TOO_SMALL", f"ball radius {r} below 4h = {4 * h}")
    xa, xb, ya, yb = g.bounds()
    inside = (xa + 2 * h <= center[0] - r and center[0] + r <= xb - 2 * h
              and ya + 2 * h <= center[1] - r and center[1] + r <= yb - 2 * h)
    require(inside, "BALL_OUTSIDE_GRID",
            f"ball B_{r}({center}) is not contained in the grid with a 2h margin")

    ball = GreenDisk((float(center[0]), float(center[1])), float(r))
    M = circle_sample_count(r, h)
    ring = circle_points(center, r, M)
    circle_term = float(np.mean(fld.interp(ring)))  # = (1/2 pi r) * contour integral

    X, Y = g.mesh()
    dist = np.hypot(X - center[0], Y - center[1])
    in_ball = dist <= r
    lap = laplacian_stencil(fld.values, h)

    jc, ic = g.nearest_index(center)
    gvals = np.zeros(g.shape)
    nz = in_ball & (dist > 0)
    gvals[nz] = np.log(dist[nz] / r) / (2 * np.pi)
    pole_avg = (square_log_integral(h / 2.0) - h * h * np.log(r)) / (2 * np.pi * h * h)
    gvals[jc, ic] = pole_avg

    area_term = float(np.sum(gvals[in_ball] * lap[in_ball]) * h * h)
    u_center = float(fld.interp(np.asarray(center, dtype=float)[None, :])[0])
    residual = abs(u_center - circle_term - area_term)
    if return_terms:
        return residual, {"u_center": u_center, "circle_term": circle_term,
                          "area_term": area_term, "ball": ball, "samples": M}
    return residual


# ---------------------------------------------------------------------------
# exact circle / rectangle overlap, used by area-fraction quadrature
# ---------------------------------------------------------------------------

def _area_left_of(t, R):
    """Area of {X <= t} inside the origin disk of radius R (vectorized)."""
    t = np.clip(np.asarray(t, dtype=float), -R, R)
    return t * np.sqrt(np.maximum(R * R - t * t, 0.0)) + R * R * np.arcsin(t / R) \
        + np.pi * R * R / 2.0


def _corner_pos(x, y, R):
    """Area of {X >= x, Y >= y} inside the disk, for x, y >= 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = x * x + y * y < R * R
    xe = np.sqrt(np.maximum(R * R - y * y, 0.0))

    def S(t):
        t = np.clip(t, -R, R)
        return 0.5 * (t * np.sqrt(np.maximum(R * R - t * t, 0.0)) + R * R * np.arcsin(t / R))

    val = S(xe) - S(np.minimum(x, xe)) - y * np.maximum(xe - x, 0.0)
    return np.where(inside, val, 0.0)


def _corner(x, y, R):
    """Area of {X >= x, Y >= y} inside the disk, any signs (vectorized).

    Negative bounds reduce to the nonnegative case by reflecting across
    the axes; area{Y >= y} equals area{X <= -y} by symmetry.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    full = np.pi * R * R
    case_pp = (x >= 0) & (y >= 0)
    case_np = (x < 0) & (y >= 0)
    case_pn = (x >= 0) & (y < 0)
    ax, ay = np.abs(x), np.abs(y)
    pp = _corner_pos(ax, ay, R)
    out = np.where(case_pp, pp,
                   np.where(case_np, _area_left_of(-y, R) - pp,
                            np.where(case_pn, _area_left_of(-x, R) - pp,
                                     full - _area_left_of(x, R) - _area_left_of(y, R) + pp)))
    return out


def disk_rect_overlap(R, x1, x2, y1, y2):
    """Exact area of the origin-centered disk of radius R with a rectangle.

    All four bounds may be arrays of a common shape.
    """
    def Q(x, y):
        # area of {X <= x, Y <= y} inside the disk
        full = np.pi * R * R
        return (full - _area_left_of(-x, R) - _area_left_of(-y, R) + _corner(x, y, R))

    return Q(x2, y2) - Q(x1, y2) - Q(x2, y1) + Q(x1, y1)
