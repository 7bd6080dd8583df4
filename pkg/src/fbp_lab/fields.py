"""Samplers that turn closed-form profiles into grid fields.

Used by tests and by the mock modes of the CLI.  Sampled fields carry
DIRICHLET tags on the array edge (and on the inner data disk when one is
given) and INTERIOR elsewhere, so stencil operators can run on them.
"""

from __future__ import annotations

import numpy as np

from .barriers import RadialSolution
from .grid import DIRICHLET, INTERIOR, Grid2D, ScalarField


def sample_scalar(grid: Grid2D, fn) -> ScalarField:
    """Evaluate fn(X, Y) on the grid; edge ring tagged DIRICHLET."""
    X, Y = grid.mesh()
    vals = np.asarray(fn(X, Y), dtype=float)
    mask = np.full(grid.shape, INTERIOR, dtype=np.uint8)
    mask[0, :] = mask[-1, :] = DIRICHLET
    mask[:, 0] = mask[:, -1] = DIRICHLET
    return ScalarField(grid, vals, mask)


def radial_field(grid: Grid2D, sol: RadialSolution) -> ScalarField:
    """Sample a RadialSolution; nodes inside its data disk are DIRICHLET."""
    X, Y = grid.mesh()
    pts = np.stack((X, Y), axis=-1)
    fld = sample_scalar(grid, lambda x, y: sol(pts))
    rho = np.hypot(X, Y)
    fld.mask[rho <= sol.r_in] = DIRICHLET
    return fld


def half_plane_field(grid: Grid2D) -> ScalarField:
    """max(y, 0): half-plane profile with unit slope."""
    return sample_scalar(grid, lambda x, y: np.maximum(y, 0.0))


def equality_pair(grid: Grid2D) -> tuple[ScalarField, ScalarField]:
    """(y+, y-): the complementary half-plane pair with unit slopes."""
    u1 = sample_scalar(grid, lambda x, y: np.maximum(y, 0.0))
    u2 = sample_scalar(grid, lambda x, y: np.maximum(-y, 0.0))
    return u1, u2


def arc_pair(grid: Grid2D) -> tuple[ScalarField, ScalarField]:
    """Harmonic pair on complementary sectors of openings pi/2 and 3*pi/2.

    u1 = r^2 sin(2t) on the first quadrant (t in (0, pi/2)), u2 =
    r^(2/3) sin(2s/3) with s the angle ccw from the ray t = pi/2.  Both
    vanish at the origin and on the two shared rays; supports disjoint.
    """
    X, Y = grid.mesh()
    theta = np.arctan2(Y, X)
    rho = np.hypot(X, Y)

    v1 = np.where((X > 0) & (Y > 0), 2.0 * X * Y, 0.0)
    u1 = sample_scalar(grid, lambda x, y: v1)

    s = theta - np.pi / 2.0
    s = np.where(s < 0, s + 2.0 * np.pi, s)
    v2 = np.where((s > 0) & (s < 1.5 * np.pi),
                  rho ** (2.0 / 3.0) * np.sin(2.0 * s / 3.0), 0.0)
    v2 = np.maximum(v2, 0.0)
    u2 = sample_scalar(grid, lambda x, y: v2)
    return u1, u2


def two_strip_field(grid: Grid2D, center, gap: float) -> ScalarField:
    """Two plane profiles flanking a slab of width 2*gap around center.

    u = (y - cy - gap)_+ + (cy - y - gap)_+ : positivity set splits into
    two components separated by the slab through the window.
    """
    cy = center[1]
    return sample_scalar(
        grid,
        lambda x, y: np.maximum(y - cy - gap, 0.0) + np.maximum(cy - y - gap, 0.0))


def zero_island_field(grid: Grid2D, sol: RadialSolution, island_center,
                      island_radius: float) -> ScalarField:
    """Radial profile with values forced to zero on a planted disk.

    The island sits strictly inside the positivity annulus, producing a
    zero-set component surrounded by positivity: the defect that the
    component audit must flag.
    """
    fld = radial_field(grid, sol)
    X, Y = grid.mesh()
    d = np.hypot(X - island_center[0], Y - island_center[1])
    fld.values[d <= island_radius] = 0.0
    return fld
