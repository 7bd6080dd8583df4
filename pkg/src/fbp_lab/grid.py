"""Uniform Cartesian grid and scalar fields on it.

Conventions used everywhere in the package:

* node (i, j) sits at (x0 + i*h, y0 + j*h); i runs along x, j along y
* field values are stored row-major with shape (ny, nx), i.e. values[j, i]
* every node carries a role tag: INTERIOR (unknown / freely analyzed),
  DIRICHLET (value pinned), OUTSIDE (no value; array slot is ignored)

The CSV layout is: one header line ``nx,ny,h,x0,y0``, one line with the
numbers, then ny rows of nx comma-separated values (row j=0 first).  The
PGM export is ASCII P2, 8 bit, min->0 and max->255, top row = largest y.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FbpError, require

INTERIOR = 0
DIRICHLET = 1
OUTSIDE = 2

# relative slack when checking that a rectangle is an integer number of cells
_COMMENSURATE_TOL = 1e-9


@dataclass(frozen=True)
class Grid2D:
    """Uniform grid with spacing h covering an axis-aligned rectangle."""

    origin: tuple[float, float]
    h: float
    nx: int
    ny: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def xs(self) -> np.ndarray:
        x0, _ = self.origin
        return x0 + self.h * np.arange(self.nx)

    def ys(self) -> np.ndarray:
        _, y0 = self.origin
        return y0 + self.h * np.arange(self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays X, Y of shape (ny, nx)."""
        X, Y = np.meshgrid(self.xs(), self.ys(), indexing="xy")
        return X, Y

    def bounds(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        return (x0, x0 + self.h * (self.nx - 1), y0, y0 + self.h * (self.ny - 1))

    def nearest_index(self, point) -> tuple[int, int]:
        """Index (j, i) of the node closest to point=(x, y)."""
        x0, y0 = self.origin
        i = int(round((point[0] - x0) / self.h))
        j = int(round((point[1] - y0) / self.h))
        i = min(max(i, 0), self.nx - 1)
        j = min(max(j, 0), self.ny - 1)
        return j, i

    def contains(self, point, margin: float = 0.0) -> bool:
        xa, xb, ya, yb = self.bounds()
        return (xa + margin <= point[0] <= xb - margin
                and ya + margin <= point[1] <= yb - margin)


def make_grid(rect, h: float) -> Grid2D:
    """Build the grid of spacing h covering rect=(xmin, xmax, ymin, ymax).

    Nodes on the rectangle boundary are included.  If a side is not an
    integer number of cells the node count is rounded up, so the grid may
    overshoot xmax/ymax by less than one cell.
    """
    require(h > 0, "NON_POSITIVE_SPACING", f"grid spacing must be positive, got {h}")
    xmin, xmax, ymin, ymax = map(float, rect)
    w, d = xmax - xmin, ymax - ymin
    require(w >= 3 * h and d >= 3 * h, "RECT_TOO_SMALL",
            f"rect sides ({w}, {d}) must be at least 3h = {3 * h}")

    def count(side):
        cells = side / h
        if abs(cells - round(cells)) <= _COMMENSURATE_TOL * max(1.0, cells):
            return int(round(cells)) + 1
        return int(np.ceil(cells - _COMMENSURATE_TOL)) + 1

    return Grid2D(origin=(xmin, ymin), h=h, nx=count(w), ny=count(d))


@dataclass
class ScalarField:
    """Grid function with per-node role tags.

    values must be finite at every non-OUTSIDE node; OUTSIDE slots may
    hold anything (use NaN to make accidental reads visible).
    """

    grid: Grid2D
    values: np.ndarray
    mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise FbpError("GRID_MISMATCH",
                           f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if self.mask is None:
            self.mask = np.full(self.grid.shape, INTERIOR, dtype=np.uint8)
        else:
            self.mask = np.asarray(self.mask, dtype=np.uint8)
            if self.mask.shape != self.grid.shape:
                raise FbpError("GRID_MISMATCH",
                               f"mask shape {self.mask.shape} != grid shape {self.grid.shape}")

    def validate(self) -> None:
        """Check the finiteness invariant; raises on violation."""
        live = self.mask != OUTSIDE
        if not np.all(np.isfinite(self.values[live])):
            bad = int(np.sum(~np.isfinite(self.values[live])))
            raise FbpError("GRID_MISMATCH", f"{bad} non-finite values at live nodes")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy(), self.mask.copy())

    def interp(self, points: np.ndarray) -> np.ndarray:
        """Bilinear interpolation at an (N, 2) array of points.

        Points must lie inside the grid rectangle; OUTSIDE-node values
        participate as stored, so callers should keep probe points away
        from OUTSIDE regions.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x0, y0 = self.grid.origin
        h = self.grid.h
        fx = (pts[:, 0] - x0) / h
        fy = (pts[:, 1] - y0) / h
        i0 = np.clip(np.floor(fx).astype(int), 0, self.grid.nx - 2)
        j0 = np.clip(np.floor(fy).astype(int), 0, self.grid.ny - 2)
        tx = np.clip(fx - i0, 0.0, 1.0)
        ty = np.clip(fy - j0, 0.0, 1.0)
        v = self.values
        v00 = v[j0, i0]
        v01 = v[j0, i0 + 1]
        v10 = v[j0 + 1, i0]
        v11 = v[j0 + 1, i0 + 1]
        out = (v00 * (1 - tx) * (1 - ty) + v01 * tx * (1 - ty)
               + v10 * (1 - tx) * ty + v11 * tx * ty)
        return out if points is pts or np.ndim(points) > 1 else out


def same_grid(a: ScalarField, b: ScalarField) -> None:
    """Raise GRID_MISMATCH unless the two fields share one grid layout."""
    ga, gb = a.grid, b.grid
    ok = (ga.nx == gb.nx and ga.ny == gb.ny
          and abs(ga.h - gb.h) <= 1e-12 * ga.h
          and abs(ga.origin[0] - gb.origin[0]) <= 1e-9 * ga.h
          and abs(ga.origin[1] - gb.origin[1]) <= 1e-9 * ga.h)
    require(ok, "GRID_MISMATCH", f"grids differ: {ga} vs {gb}")


def field_to_csv(fld: ScalarField, path) -> None:
    """Write the field in the package CSV layout (values only, no mask)."""
    g = fld.grid
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("nx,ny,h,x0,y0\n")
            fh.write("%d,%d,%.17g,%.17g,%.17g\n" % (g.nx, g.ny, g.h, g.origin[0], g.origin[1]))
            for j in range(g.ny):
                fh.write(",".join("%.17g" % v for v in fld.values[j]))
                fh.write("\n")
    except OSError as exc:
        raise FbpError("IO_FAILURE", f"cannot write field CSV {path}: {exc}") from exc


def field_from_csv(path) -> ScalarField:
    """Read a field written by field_to_csv.

    The mask comes back INTERIOR everywhere except the array edge, which
    is tagged DIRICHLET so that stencil operators have closed neighbors.
    """
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if header != ["nx", "ny", "h", "x0", "y0"]:
                raise FbpError("IO_FAILURE", f"bad field CSV header in {path}: {header}")
            parts = fh.readline().strip().split(",")
            nx, ny = int(parts[0]), int(parts[1])
            h, x0, y0 = float(parts[2]), float(parts[3]), float(parts[4])
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise FbpError("IO_FAILURE", f"cannot read field CSV {path}: {exc}") from exc
    except ValueError as exc:
        raise FbpError("IO_FAILURE", f"malformed field CSV {path}: {exc}") from exc
    if data.shape != (ny, nx):
        raise FbpError("IO_FAILURE",
                       f"field CSV {path} body shape {data.shape} != header ({ny}, {nx})")
    grid = Grid2D(origin=(x0, y0), h=h, nx=nx, ny=ny)
    mask = np.full((ny, nx), INTERIOR, dtype=np.uint8)
    mask[0, :] = mask[-1, :] = DIRICHLET
    mask[:, 0] = mask[:, -1] = DIRICHLET
    return ScalarField(grid, data, mask)


def field_to_pgm(fld: ScalarField, path) -> None:
    """8-bit ASCII PGM for eyeballing; min maps to 0, max to 255."""
    live = fld.mask != OUTSIDE
    vals = np.where(live, fld.values, np.nan)
    lo = np.nanmin(vals) if live.any() else 0.0
    hi = np.nanmax(vals) if live.any() else 0.0
    if hi > lo:
        pix = np.clip((vals - lo) / (hi - lo) * 255.0, 0, 255)
    else:
        pix = np.zeros_like(vals)
    pix = np.where(np.isfinite(pix), pix, 0.0).astype(np.uint8)
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("P2\n%d %d\n255\n" % (fld.grid.nx, fld.grid.ny))
            for j in range(fld.grid.ny - 1, -1, -1):  # top row first
                fh.write(" ".join(str(int(v)) for v in pix[j]))
                fh.write("\n")
    except OSError as exc:
        raise FbpError("IO_FAILURE", f"cannot write PGM {path}: {exc}") from exc
