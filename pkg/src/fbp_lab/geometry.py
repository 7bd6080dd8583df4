"""Discrete geometry of positivity sets and zero sets.

Connectivity conventions: the positivity set uses 4-connectivity, the
zero set 8-connectivity, so a single-cell diagonal pinch cannot make
both sides connected.  The "open" zero set consists of zero nodes whose
whole 8-neighborhood is zero (Chebyshev distance >= 2 cells from every
positive node, counting the node spacing), i.e. one erosion of the zero
mask.  Labels follow array scan order, so they are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from .errors import FbpError, require
from .grid import Grid2D, ScalarField

FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
EIGHT = np.ones((3, 3), dtype=bool)


def positivity_threshold(fld: ScalarField) -> float:
    """Default threshold separating positive values from zero: 1e-12 * max."""
    top = float(np.nanmax(fld.values)) if fld.values.size else 0.0
    return 1e-12 * max(top, 0.0)


@dataclass
class Component:
    """One labeled component: node indices (j, i) plus derived geometry."""

    label: int
    nodes: np.ndarray            # (N, 2) int array of (j, i)
    grid: Grid2D
    touches_edge: bool

    def points(self) -> np.ndarray:
        """Node coordinates as an (N, 2) array of (x, y)."""
        x0, y0 = self.grid.origin
        h = self.grid.h
        return np.column_stack((x0 + self.nodes[:, 1] * h, y0 + self.nodes[:, 0] * h))

    @property
    def area(self) -> float:
        return len(self.nodes) * self.grid.h ** 2

    @property
    def diameter(self) -> float:
        pts = self.points()
        if len(pts) < 2:
            return 0.0
        if len(pts) > 2000:
            try:
                pts = pts[ConvexHull(pts).vertices]
            except QhullError:
                pass  # collinear; fall through to direct pairwise distances
        return float(pdist(pts).max())


@dataclass
class RegionDecomposition:
    """Components of the positivity set and of the open zero set."""

    grid: Grid2D
    threshold: float
    pos_mask: np.ndarray
    zero_open_mask: np.ndarray
    pos_labels: np.ndarray
    zero_labels: np.ndarray
    pos_components: list = field(default_factory=list)
    zero_components: list = field(default_factory=list)


def _components_from_labels(labels: np.ndarray, n: int, grid: Grid2D) -> list:
    out = []
    edge = np.zeros(labels.shape, dtype=bool)
    edge[0, :] = edge[-1, :] = True
    edge[:, 0] = edge[:, -1] = True
    slices = ndimage.find_objects(labels)
    for lab in range(1, n + 1):
        sl = slices[lab - 1]
        local = labels[sl] == lab
        jj, ii = np.nonzero(local)
        nodes = np.column_stack((jj + sl[0].start, ii + sl[1].start))
        touches = bool(np.any(edge[sl][local]))
        out.append(Component(label=lab, nodes=nodes, grid=grid, touches_edge=touches))
    return out


def label_components(fld: ScalarField, threshold: float | None = None) -> RegionDecomposition:
    """Label positivity components (4-conn) and open-zero components (8-conn)."""
    if threshold is None:
        threshold = positivity_threshold(fld)
    pos = fld.values > threshold
    zero = ~pos
    # erode with the zero set continuing past the array edge
    zero_open = ndimage.binary_erosion(zero, structure=EIGHT, border_value=1)
    pos_labels, n_pos = ndimage.label(pos, structure=FOUR)
    zero_labels, n_zero = ndimage.label(zero_open, structure=EIGHT)
    dec = RegionDecomposition(grid=fld.grid, threshold=threshold, pos_mask=pos,
                              zero_open_mask=zero_open, pos_labels=pos_labels,
                              zero_labels=zero_labels)
    dec.pos_components = _components_from_labels(pos_labels, n_pos, fld.grid)
    dec.zero_components = _components_from_labels(zero_labels, n_zero, fld.grid)
    return dec


def _dist_to_set(mask: np.ndarray, h: float) -> np.ndarray:
    """Distance (in length units) from every node to the nearest True node."""
    if not mask.any():
        return np.full(mask.shape, np.inf)
    return ndimage.distance_transform_edt(~mask) * h


@dataclass(frozen=True)
class TangentBallRecord:
    """Ball of radius rho on one side of the free boundary touching x0."""

    side: str                      # "exterior" (in the zero set) or "interior"
    rho: float
    center: tuple[float, float]
    contact_point: tuple[float, float]
    gap: float                     # | |center - x0| - rho |, at most one cell
    wrong_side_nodes: int          # nodes of the other phase strictly inside


def find_tangent_balls(fld: ScalarField, x0, rho_list, side: str = "exterior",
                       threshold: float | None = None) -> list:
    """Largest-clearance tangent balls at a free boundary point.

    For each rho the candidate centers are nodes of the requested side
    whose distance to the other side is at least rho (so B_rho(center)
    stays in the side's phase up to cell resolution) and whose sphere
    passes within one cell of x0.  The center minimizing the contact gap
    wins, ties broken by scan order.  Radii below 2h yield no record.
    """
    require(side in ("exterior", "interior"), "SPEC_INVALID", f"unknown side {side!r}")
    if threshold is None:
        threshold = positivity_threshold(fld)
    g = fld.grid
    h = g.h
    pos = fld.values > threshold
    d_pos = _dist_to_set(pos, h)
    d_zero = _dist_to_set(~pos, h)
    j0, i0 = g.nearest_index(x0)
    on_fb = d_pos[j0, i0] <= 1.5 * h and d_zero[j0, i0] <= 1.5 * h
    require(on_fb, "POINT_NOT_ON_BOUNDARY",
            f"point {tuple(x0)} is not within a cell of the free boundary")

    clearance = d_pos if side == "exterior" else d_zero
    side_mask = ~pos if side == "exterior" else pos
    X, Y = g.mesh()
    dist_x0 = np.hypot(X - x0[0], Y - x0[1])
    xa, xb, ya, yb = g.bounds()

    records = []
    for rho in rho_list:
        if rho < 2 * h:
            continue
        edge_room = min(x0[0] - xa, xb - x0[0], x0[1] - ya, yb - x0[1])
        require(edge_room >= rho, "BALL_OUTSIDE_GRID",
                f"radius {rho} ball at {tuple(x0)} cannot fit inside the grid")
        cand = side_mask & (clearance >= rho) & (np.abs(dist_x0 - rho) <= h)
        if not cand.any():
            continue
        gaps = np.where(cand, np.abs(dist_x0 - rho), np.inf)
        j, i = np.unravel_index(np.argmin(gaps), gaps.shape)  # argmin is scan-order stable
        center = (float(X[j, i]), float(Y[j, i]))
        inside = (np.hypot(X - center[0], Y - center[1]) < rho - 1e-9) & ~side_mask
        records.append(TangentBallRecord(side=side, rho=float(rho), center=center,
                                         contact_point=(float(x0[0]), float(x0[1])),
                                         gap=float(gaps[j, i]),
                                         wrong_side_nodes=int(inside.sum())))
    return records


def density_profile(fld: ScalarField, x0, radii, threshold: float | None = None) -> list:
    """Fractions of B_r(x0) occupied by each phase, against the exact area.

    Returns [(r, frac_positive, frac_zero), ...].  Node counting with
    weight h^2 over pi r^2, so the two fractions sum to 1 + O(h/r).
    """
    if threshold is None:
        threshold = positivity_threshold(fld)
    g = fld.grid
    h = g.h
    pos = fld.values > threshold
    X, Y = g.mesh()
    dist = np.hypot(X - x0[0], Y - x0[1])
    xa, xb, ya, yb = g.bounds()
    out = []
    for r in radii:
        require(r >= 2 * h, "RADIUS_TOO_SMALL", f"density radius {r} below 2h")
        fits = (xa <= x0[0] - r and x0[0] + r <= xb and ya <= x0[1] - r and x0[1] + r <= yb)
        require(fits, "WINDOW_OUTSIDE_GRID", f"B_{r}({tuple(x0)}) leaves the grid")
        ball = dist <= r
        area = np.pi * r * r
        out.append((float(r),
                    float(pos[ball].sum() * h * h / area),
                    float((~pos)[ball].sum() * h * h / area)))
    return out


def perimeter_boxcount(comp: Component, eps_list) -> list:
    """Greedy eps-net size of the component boundary, scaled by eps.

    Boundary nodes are component nodes with a 4-neighbor outside the
    component.  Centers are accepted in scan order whenever they are
    farther than eps from all accepted centers, so N(eps) * eps tracks
    the boundary length.
    """
    require(len(comp.nodes) > 0, "EMPTY_COMPONENT", "cannot box-count an empty component")
    g = comp.grid
    mask = np.zeros(g.shape, dtype=bool)
    mask[comp.nodes[:, 0], comp.nodes[:, 1]] = True
    inner = ndimage.binary_erosion(mask, structure=FOUR, border_value=0)
    jj, ii = np.nonzero(mask & ~inner)
    x0, y0 = g.origin
    pts = np.column_stack((x0 + ii * g.h, y0 + jj * g.h))

    out = []
    for eps in eps_list:
        centers = np.empty((0, 2))
        for p in pts:
            if centers.size == 0 or np.min(np.hypot(*(centers - p).T)) > eps:
                centers = np.vstack((centers, p))
        out.append((float(eps), len(centers), float(len(centers) * eps)))
    return out


def angular_traces(dec: RegionDecomposition, labels: tuple[int, int], x_c, radii) -> list:
    """Arc fractions of circles around x_c inside two given components.

    Returns [(r, t1, t2), ...] where the component covers an arc of
    length pi * t_i, i.e. t_i = 2 * (hit fraction).  Membership is by
    nearest-node label lookup with M = max(64, ceil(2 pi r / h)) samples.
    """
    for lab in labels:
        require(any(c.label == lab for c in dec.pos_components),
                "COMPONENT_COUNT_MISMATCH", f"no positivity component labeled {lab}")
    g = dec.grid
    h = g.h
    x0, y0 = g.origin
    out = []
    for r in radii:
        M = max(64, int(np.ceil(2 * np.pi * r / h)))
        th = 2 * np.pi * np.arange(M) / M
        px = x_c[0] + r * np.cos(th)
        py = x_c[1] + r * np.sin(th)
        ii = np.clip(np.round((px - x0) / h).astype(int), 0, g.nx - 1)
        jj = np.clip(np.round((py - y0) / h).astype(int), 0, g.ny - 1)
        hit = dec.pos_labels[jj, ii]
        t1 = 2.0 * float(np.mean(hit == labels[0]))
        t2 = 2.0 * float(np.mean(hit == labels[1]))
        out.append((float(r), t1, t2))
    return out


def zero_component_audit(fld: ScalarField, center=None, r: float | None = None,
                         threshold: float | None = None) -> dict:
    """Find zero-set components that are enclosed by positivity.

    Full-grid mode (center None): a violation is an open-zero component
    that does not reach the array edge; the ambient zero sea always does.
    Windowed mode: components strictly inside B_r(center) (clear of its
    sphere by one cell) are violations, components meeting the sphere are
    listed as touching, and the largest zero-set ball centered in
    B_{r/2}(center) is reported (center, radius, radius / r).
    """
    if threshold is None:
        threshold = positivity_threshold(fld)
    dec = label_components(fld, threshold=threshold)
    g = fld.grid
    h = g.h

    if center is None:
        violations = [c for c in dec.zero_components if not c.touches_edge]
        return {"mode": "full", "violations": violations,
                "touching": [c for c in dec.zero_components if c.touches_edge],
                "n_zero_components": len(dec.zero_components)}

    require(r is not None and r >= 4 * h, "RADIUS_TOO_SMALL",
            f"audit window radius must be >= 4h, got {r}")
    X, Y = g.mesh()
    dist = np.hypot(X - center[0], Y - center[1])
    violations, touching = [], []
    for c in dec.zero_components:
        d = dist[c.nodes[:, 0], c.nodes[:, 1]]
        if d.max() <= r - h:
            violations.append(c)
        elif d.min() <= r:
            touching.append(c)

    half = dist <= r / 2.0
    d_pos = _dist_to_set(fld.values > threshold, h)
    best = np.where(half, d_pos, -np.inf)
    j, i = np.unravel_index(np.argmax(best), best.shape)
    inscribed_r = float(best[j, i]) if np.isfinite(best[j, i]) else 0.0
    return {"mode": "window", "violations": violations, "touching": touching,
            "inscribed_center": (float(X[j, i]), float(Y[j, i])),
            "inscribed_radius": inscribed_r,
            "inscribed_radius_normalized": inscribed_r / r}
