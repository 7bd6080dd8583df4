"""Shared fixtures.

The reference problems are solved once per session at two spacings each;
the finer modulated solve takes tens of seconds, so everything that only
inspects a solution reuses these.
"""

import numpy as np
import pytest

from fbp_lab.solver import (DiskRegion, ProblemSpec, SolverParams,
                            solve_largest_subsolution)

RECT = (-2.5, 2.5, -2.5, 2.5)

# root of R ln R = 1 / sqrt(2): free boundary radius for g = 1, f = 2
# on the unit disk (bisection to 1e-12, frozen)
R_STAR = 1.5692542646767556
# 1 / ln R_STAR: gradient bound of the radial profile
C2_STAR = 2.2192606639188197


def radial_spec() -> ProblemSpec:
    return ProblemSpec(rect=RECT, disk=DiskRegion((0.0, 0.0), 1.0),
                       g=1.0, f=2.0, lam=2.0, Lam=2.0)


def _f_modulated(pts):
    pts = np.asarray(pts, dtype=float)
    return 2.0 + 0.5 * np.sin(4.0 * np.arctan2(pts[..., 1], pts[..., 0]))


def modulated_spec() -> ProblemSpec:
    """Angle-modulated rate 2 + 0.5 sin(4 theta), band [1.5, 2.5]."""
    return ProblemSpec(rect=RECT, disk=DiskRegion((0.0, 0.0), 1.0),
                       g=1.0, f=_f_modulated, lam=1.5, Lam=2.5)


@pytest.fixture(scope="session")
def bench64():
    return solve_largest_subsolution(radial_spec(), SolverParams(h=2.0 ** -6))


@pytest.fixture(scope="session")
def bench128():
    return solve_largest_subsolution(radial_spec(), SolverParams(h=2.0 ** -7))


@pytest.fixture(scope="session")
def mod64():
    return solve_largest_subsolution(modulated_spec(), SolverParams(h=2.0 ** -6))


@pytest.fixture(scope="session")
def mod128():
    return solve_largest_subsolution(modulated_spec(), SolverParams(h=2.0 ** -7))
