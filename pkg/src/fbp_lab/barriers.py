"""Closed-form radial solutions, supersolution barriers, sector harmonics.

The radial building block: for Dirichlet data g0 on the circle |x| = r_in
and gradient condition |grad u|^2 = f0 on the outer zero circle, the free
radius R solves R * ln(R / r_in) = g0 / sqrt(f0).  All radii here come
from one bisection routine so results are deterministic to 1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FbpError, require
from .disk import poisson_disk_eval

_BISECT_ITERS = 200
_BISECT_TOL = 1e-12


def bernoulli_radius(r_in: float, g0: float, f0: float) -> float:
    """Root R > r_in of R * ln(R / r_in) = g0 / sqrt(f0), by bisection.

    Bracket is [r_in * (1 + 1e-6), 50 * r_in]; raises NO_ROOT_IN_BRACKET
    when the target is not enclosed.
    """
    require(r_in > 0 and g0 > 0 and f0 > 0, "SPEC_INVALID",
            f"need r_in, g0, f0 > 0, got ({r_in}, {g0}, {f0})")
    target = g0 / np.sqrt(f0)
    a = r_in * (1.0 + 1e-6)
    b = 50.0 * r_in
    fa = a * np.log(a / r_in) - target
    fb = b * np.log(b / r_in) - target
    if fa > 0 or fb < 0:
        raise FbpError("NO_ROOT_IN_BRACKET",
                       f"R ln(R/{r_in}) = {target} has no root in [{a}, {b}]")
    for _ in range(_BISECT_ITERS):
        m = 0.5 * (a + b)
        fm = m * np.log(m / r_in) - target
        if fm <= 0:
            a = m
        else:
            b = m
        if b - a <= _BISECT_TOL:
            break
    return 0.5 * (a + b)


@dataclass(frozen=True)
class RadialSolution:
    """u(x) = g0 * ln(|x|/R) / ln(r_in/R) between the circles, clamped.

    Value g0 inside |x| <= r_in, zero outside |x| >= R; the outward slope
    at R satisfies slope^2 = f0 by construction of R.
    """

    r_in: float
    g0: float
    f0: float
    R: float

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        rho = np.hypot(pts[..., 0], pts[..., 1])
        with np.errstate(divide="ignore"):
            w = self.g0 * np.log(np.maximum(rho, 1e-300) / self.R) / np.log(self.r_in / self.R)
        return np.clip(w, 0.0, self.g0)

    def flux_at_R(self) -> float:
        """|u'| on the outer circle."""
        return self.g0 / (self.R * np.log(self.R / self.r_in))

    def gradient_norm(self, rho: np.ndarray) -> np.ndarray:
        """|grad u| at radius rho, zero outside the annulus."""
        rho = np.asarray(rho, dtype=float)
        g = self.g0 / (np.maximum(rho, 1e-300) * np.log(self.R / self.r_in))
        return np.where((rho >= self.r_in) & (rho <= self.R), g, 0.0)


def radial_solution(r_in: float, g0: float, f0: float) -> RadialSolution:
    """Exact rotationally symmetric solution with |grad|^2 = f0 at its free circle."""
    R = bernoulli_radius(r_in, g0, f0)
    return RadialSolution(r_in=r_in, g0=g0, f0=f0, R=R)


@dataclass(frozen=True)
class SupersolutionBarrier:
    """Log barrier h(x) = (ln(|x|/R0) / ln(r/R0))_+ dominating unit data on |x|=r.

    R0 is the least radius beyond which the barrier slope condition
    1 / (R^2 ln^2(r/R)) < lam holds, i.e. the root of R ln(R/r) = 1/sqrt(lam).
    Any subsolution with data <= 1 on the circle |x| = r stays below h, so
    its positivity set stays inside B_R0.
    """

    r: float
    lam: float
    R0: float

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        rho = np.hypot(pts[..., 0], pts[..., 1])
        with np.errstate(divide="ignore"):
            w = np.log(np.maximum(rho, 1e-300) / self.R0) / np.log(self.r / self.R0)
        return np.clip(w, 0.0, 1.0)

    def slope_at_R0(self) -> float:
        return 1.0 / (self.R0 * np.log(self.R0 / self.r))


def supersolution_barrier(r: float, lam: float) -> SupersolutionBarrier:
    require(r > 0 and lam > 0, "SPEC_INVALID", f"need r, lam > 0, got ({r}, {lam})")
    R0 = bernoulli_radius(r, 1.0, lam)
    return SupersolutionBarrier(r=r, lam=lam, R0=R0)


def sector_harmonic(alpha: float):
    """Homogeneous harmonic h(r, t) = r^(a/2) * cos((a/2) * (t + pi/a)).

    Harmonic away from the vertex, vanishing on the rays t = 0 and
    t = -2*pi/alpha (aperture 2*pi/alpha), positive in between for the
    principal atan2 branch.  alpha must lie in [1, 8].
    """
    require(1.0 <= alpha <= 8.0, "ALPHA_OUT_OF_RANGE",
            f"sector exponent alpha must be in [1, 8], got {alpha}")

    def h(points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        rho = np.hypot(x, y)
        theta = np.arctan2(y, x)
        return rho ** (alpha / 2.0) * np.cos((alpha / 2.0) * theta + np.pi / 2.0)

    return h


def planar_barrier_slope_bound(kind: str, delta: float, step: float = 1e-3,
                               M: int = 65536) -> float:
    """Lower bound on the inward slope of a harmonic barrier at a flat gap.

    kind "SINGLE_PLANE": boundary trace y2+ on the unit circle, evaluated
    at the circle point with height -delta/2 just below the trace support;
    grows like |ln delta|.  kind "TWO_PLANES": trace is the indicator of
    the two-plane support {|y2| > delta}, evaluated at (1, 0) in the
    middle of the gap; grows like 1/delta.

    The bound is the first-order incremental quotient of the Poisson
    extension along the inward normal, Richardson-extrapolated from
    steps (step, step/2).
    """
    require(0 < delta < 0.5, "DELTA_OUT_OF_RANGE",
            f"gap half-width delta must be in (0, 0.5), got {delta}")

    if kind == "SINGLE_PLANE":
        trace = lambda th: np.maximum(np.sin(th), 0.0)
        x0 = np.array([np.sqrt(1.0 - (delta / 2.0) ** 2), -delta / 2.0])
    elif kind == "TWO_PLANES":
        trace = lambda th: (np.abs(np.sin(th)) > delta).astype(float)
        x0 = np.array([1.0, 0.0])
    else:
        raise ValueError(f"unknown kind {kind!r}")

    def quotient(s):
        w = poisson_disk_eval(trace, (1.0 - s) * x0, M=M)
        return float(w) / s

    q1 = quotient(step)
    q2 = quotient(step / 2.0)
    return 2.0 * q2 - q1
