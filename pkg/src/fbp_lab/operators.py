"""Finite-difference operators and the Dirichlet harmonic solver."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FbpError, require
from .grid import DIRICHLET, INTERIOR, OUTSIDE, ScalarField

# Gauss-Seidel sweep cap for the relaxation backend
_MAX_SWEEPS = 200_000


def laplacian_stencil(values: np.ndarray, h: float) -> np.ndarray:
    """Raw 5-point Laplacian (u_E + u_W + u_N + u_S - 4u)/h^2.

    Computed wherever all four array neighbors exist; the outermost ring
    is NaN.  No mask logic: analysis code that wants the Laplacian of a
    clamped field (kinks included) uses this directly.
    """
    out = np.full_like(values, np.nan, dtype=float)
    out[1:-1, 1:-1] = (values[1:-1, 2:] + values[1:-1, :-2]
                       + values[2:, 1:-1] + values[:-2, 1:-1]
                       - 4.0 * values[1:-1, 1:-1]) / (h * h)
    return out


def discrete_laplacian(fld: ScalarField) -> ScalarField:
    """5-point Laplacian at INTERIOR nodes of fld.

    Every INTERIOR node must have its four neighbors present (inside the
    array and not OUTSIDE); otherwise MISSING_NEIGHBOR is raised.  The
    result is INTERIOR where computed and OUTSIDE elsewhere, with NaN in
    the uncomputed slots.
    """
    interior = fld.mask == INTERIOR
    edge = np.zeros_like(interior)
    edge[0, :] = edge[-1, :] = True
    edge[:, 0] = edge[:, -1] = True
    if np.any(interior & edge):
        j, i = np.argwhere(interior & edge)[0]
        raise FbpError("MISSING_NEIGHBOR",
                       f"INTERIOR node ({i}, {j}) lies on the array edge")
    outside = fld.mask == OUTSIDE
    for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        shifted = np.roll(outside, (dj, di), axis=(0, 1))
        bad = interior & shifted
        if np.any(bad):
            j, i = np.argwhere(bad)[0]
            raise FbpError("MISSING_NEIGHBOR",
                           f"INTERIOR node ({i}, {j}) has an OUTSIDE neighbor")

    raw = laplacian_stencil(fld.values, fld.grid.h)
    out = np.full(fld.grid.shape, np.nan)
    out[interior] = raw[interior]
    mask = np.where(interior, INTERIOR, OUTSIDE).astype(np.uint8)
    return ScalarField(fld.grid, out, mask)


def gradient_magnitude(fld: ScalarField) -> ScalarField:
    """|grad u| via central differences, one-sided at region edges.

    Computed at every non-OUTSIDE node.  Per direction, a central
    difference is used when both neighbors are live, a one-sided one when
    only one is; a node with no live neighbor in some direction raises
    MISSING_NEIGHBOR.  Exact for affine fields.
    """
    gx, gy = gradient_components(fld)
    out = np.hypot(gx, gy)
    live = fld.mask != OUTSIDE
    vals = np.full(fld.grid.shape, np.nan)
    vals[live] = out[live]
    mask = np.where(live, INTERIOR, OUTSIDE).astype(np.uint8)
    return ScalarField(fld.grid, vals, mask)


def gradient_components(fld: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """(du/dx, du/dy) with the same neighbor rules as gradient_magnitude."""
    v = fld.values
    h = fld.grid.h
    live = fld.mask != OUTSIDE

    def axis_deriv(axis):
        has_plus = np.zeros_like(live)
        has_minus = np.zeros_like(live)
        vplus = np.zeros_like(v)
        vminus = np.zeros_like(v)
        if axis == 0:  # x, array axis 1
            has_plus[:, :-1] = live[:, 1:]
            has_minus[:, 1:] = live[:, :-1]
            vplus[:, :-1] = v[:, 1:]
            vminus[:, 1:] = v[:, :-1]
        else:  # y, array axis 0
            has_plus[:-1, :] = live[1:, :]
            has_minus[1:, :] = live[:-1, :]
            vplus[:-1, :] = v[1:, :]
            vminus[1:, :] = v[:-1, :]
        none = live & ~has_plus & ~has_minus
        if np.any(none):
            j, i = np.argwhere(none)[0]
            raise FbpError("MISSING_NEIGHBOR",
                           f"node ({i}, {j}) has no live neighbor along axis {axis}")
        central = has_plus & has_minus
        d = np.zeros_like(v)
        d[central] = (vplus[central] - vminus[central]) / (2 * h)
        only_p = has_plus & ~has_minus
        d[only_p] = (vplus[only_p] - v[only_p]) / h
        only_m = has_minus & ~has_plus
        d[only_m] = (v[only_m] - vminus[only_m]) / h
        return d

    return axis_deriv(0), axis_deriv(1)


def solve_dirichlet_harmonic(fld: ScalarField, tol: float | None = None,
                             method: str = "direct") -> ScalarField:
    """Solve the 5-point Laplace equation on the INTERIOR nodes of fld.

    DIRICHLET node values are the boundary data and come back unchanged.
    Every INTERIOR node must be enclosed by INTERIOR/DIRICHLET neighbors
    (OPEN_BOUNDARY otherwise).  The returned field satisfies
    |discrete_laplacian| <= tol at every INTERIOR node; the default tol
    is 1e-8 times the Dirichlet data range (and at least 1e-12).

    method:
      * "direct" - sparse LU factorization (default)
      * "relax"  - red-black successive over-relaxation; deterministic
        fixed sweep order (red lattice pass then black pass), raises
        NO_CONVERGENCE when the sweep budget is exhausted
    """
    interior = fld.mask == INTERIOR
    dirichlet = fld.mask == DIRICHLET
    n_int = int(interior.sum())
    if n_int == 0:
        return fld.copy()

    edge = np.zeros_like(interior)
    edge[0, :] = edge[-1, :] = True
    edge[:, 0] = edge[:, -1] = True
    open_nodes = interior & edge
    outside = ~interior & ~dirichlet
    for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        open_nodes |= interior & np.roll(outside, (dj, di), axis=(0, 1))
    if np.any(open_nodes):
        j, i = np.argwhere(open_nodes)[0]
        raise FbpError("OPEN_BOUNDARY",
                       f"INTERIOR node ({i}, {j}) is not enclosed by Dirichlet data")

    if tol is None:
        dr = float(np.ptp(fld.values[dirichlet])) if dirichlet.any() else 0.0
        tol = max(1e-8 * dr, 1e-12)

    if method == "direct":
        out = _solve_direct(fld, interior, dirichlet)
    elif method == "relax":
        out = _solve_relax(fld, interior, dirichlet, tol)
    else:
        raise ValueError(f"unknown method {method!r}")

    res = laplacian_stencil(out.values, fld.grid.h)
    worst = float(np.nanmax(np.abs(res[interior]))) if n_int else 0.0
    require(worst <= tol, "NO_CONVERGENCE",
            f"harmonic solve residual {worst:.3e} above tol {tol:.3e}")
    return out


def _solve_direct(fld: ScalarField, interior: np.ndarray, dirichlet: np.ndarray) -> ScalarField:
    idx = -np.ones(fld.grid.shape, dtype=np.int64)
    n = int(interior.sum())
    idx[interior] = np.arange(n)
    vals = fld.values

    rows = [np.arange(n)]
    cols = [np.arange(n)]
    data = [np.full(n, 4.0)]
    b = np.zeros(n)
    for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        nb_idx = np.roll(idx, (-dj, -di), axis=(0, 1))
        nb_dir = np.roll(dirichlet, (-dj, -di), axis=(0, 1))
        nb_val = np.roll(vals, (-dj, -di), axis=(0, 1))
        m = interior & (nb_idx >= 0)
        rows.append(idx[m])
        cols.append(nb_idx[m])
        data.append(np.full(int(m.sum()), -1.0))
        md = interior & nb_dir
        np.add.at(b, idx[md], nb_val[md])
    A = sp.csc_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    x = spla.splu(A).solve(b)
    out = fld.copy()
    out.values[interior] = x
    return out


def _solve_relax(fld: ScalarField, interior: np.ndarray, dirichlet: np.ndarray,
                 tol: float) -> ScalarField:
    h = fld.grid.h
    v = fld.values.copy()
    v[interior] = 0.0
    live = interior | dirichlet
    vv = np.where(live, v, 0.0)

    J, I = np.indices(fld.grid.shape)
    red = interior & ((I + J) % 2 == 0)
    black = interior & ((I + J) % 2 == 1)
    n = max(fld.grid.nx, fld.grid.ny)
    omega = 2.0 / (1.0 + np.sin(np.pi / n))

    def sweep(color):
        nb = (np.roll(vv, 1, axis=1) + np.roll(vv, -1, axis=1)
              + np.roll(vv, 1, axis=0) + np.roll(vv, -1, axis=0))
        vv[color] += omega * (nb[color] / 4.0 - vv[color])

    for it in range(_MAX_SWEEPS):
        sweep(red)
        sweep(black)
        if it % 32 == 0 or it == _MAX_SWEEPS - 1:
            res = laplacian_stencil(vv, h)
            if float(np.nanmax(np.abs(res[interior]))) <= tol:
                break
    else:
        raise FbpError("NO_CONVERGENCE",
                       f"relaxation exhausted {_MAX_SWEEPS} sweeps without reaching tol={tol:.3e}")

    out = fld.copy()
    out.values[interior] = vv[interior]
    return out
