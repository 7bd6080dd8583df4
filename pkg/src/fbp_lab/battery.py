"""Experiment runner: solve per grid spacing, run the configured check
battery, and emit deterministic artifacts (field CSV, boundary polyline
CSV, report JSON, SVG plots, summary).

Refinement entries are independent; they fan out over a thread pool
capped by FBP_LAB_THREADS.  All files are per-h except the final
summary, so parallel runs never contend on a path.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import verify
from .barriers import bernoulli_radius, radial_solution
from .config import ExperimentConfig
from .errors import FbpError, require
from .fields import two_strip_field, zero_island_field
from .grid import field_to_csv, make_grid
from . import __version__
from .solver import (Solution, check_viscosity_subsolution, fbc_residual,
                     solution_from_field, solve_largest_subsolution)
from .verify import FAIL, FINDING, PASS


@dataclass
class HRun:
    h: float
    sol: Solution
    report: dict


@dataclass
class ExperimentResult:
    cfg: ExperimentConfig
    runs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def all_records(self):
        recs = []
        for run in self.runs:
            recs.extend(run.report["checks"])
        recs.extend(self.summary.get("checks", []))
        return recs

    def exit_code(self) -> int:
        verdicts = {rec["verdict"] for rec in self.all_records()}
        if FAIL in verdicts:
            return 1
        if FINDING in verdicts:
            return 2
        return 0


def _thread_count(explicit=None) -> int:
    if explicit:
        return max(1, int(explicit))
    env = os.environ.get("FBP_LAB_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def _edge_margin(grid, p) -> float:
    xa, xb, ya, yb = grid.bounds()
    return min(p[0] - xa, xb - p[0], p[1] - ya, yb - p[1])


def _anchor_point(sol: Solution) -> np.ndarray:
    """Deterministic probe anchor: boundary point closest to angle 0."""
    pts = sol.fb_points
    require(len(pts) > 0, "EMPTY_FREE_BOUNDARY", "no boundary points to probe")
    c = sol.spec.disk.center
    ang = np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0])
    return pts[int(np.argmin(np.abs(ang)))]


def _dyadic(lo: float, hi: float):
    out = []
    r = lo
    while r <= hi + 1e-12:
        out.append(r)
        r *= 2
    return out


def _constant_data(cfg: ExperimentConfig):
    """(g0, f0) when both data fields are constant, else None."""
    xs = np.linspace(cfg.spec.rect[0], cfg.spec.rect[1], 41)
    ys = np.linspace(cfg.spec.rect[2], cfg.spec.rect[3], 41)
    X, Y = np.meshgrid(xs, ys)
    pts = np.stack((X, Y), axis=-1)
    gv = cfg.spec.g_at(pts)
    fv = cfg.spec.f_at(pts)
    if np.ptp(gv) <= 1e-12 * max(1.0, abs(float(gv.flat[0]))) \
            and np.ptp(fv) <= 1e-12 * max(1.0, abs(float(fv.flat[0]))):
        return float(gv.flat[0]), float(fv.flat[0])
    return None


def _radius_record(sol: Solution, cfg: ExperimentConfig) -> dict:
    target = cfg.checks["radius_target"]
    if target == "auto":
        const = _constant_data(cfg)
        require(const is not None, "CONFIG_INVALID",
                "checks.radius_target: auto needs constant g and f")
        target = bernoulli_radius(cfg.spec.disk.radius, const[0], const[1])
    c = cfg.spec.disk.center
    radii = np.hypot(sol.fb_points[:, 0] - c[0], sol.fb_points[:, 1] - c[1])
    measured = float(np.mean(radii))
    tol = cfg.checks["radius_tol_cells"] * sol.params.h
    ok = abs(measured - target) <= tol
    return {"name": "free_boundary_radius",
            "claim": "for constant data the free boundary is the circle "
                     "solving R ln(R/r_in) = g/sqrt(f)",
            "measured": measured, "target": float(target), "tol": tol,
            "radius_min": float(np.min(radii)), "radius_max": float(np.max(radii)),
            "verdict": PASS if ok else FAIL}


def _fbc_record(sol: Solution) -> dict:
    res = fbc_residual(sol)
    band = sol.params.band(f_max=float(np.max(
        sol.spec.f_at(sol.fb_points))) if len(sol.fb_points) else 1.0)
    ok = sol.converged and res["max_abs"] <= band
    return {"name": "fbc_residual",
            "claim": "the squared boundary flux matches the free "
                     "boundary rate within the discretization band",
            "max_abs": res["max_abs"], "mean_abs": res["mean_abs"],
            "rms": res["rms"], "band": band, "n_points": res["n_points"],
            "converged": bool(sol.converged),
            "verdict": PASS if ok else FAIL}


def _viscosity_record(sol: Solution, tol) -> dict:
    res = check_viscosity_subsolution(sol, tol=tol)
    ok = res["n_violations"] == 0 and res["subharmonic_ok"]
    return {"name": "viscosity_certificate",
            "claim": "no exterior tangent ball sees boundary growth "
                     "below the rate floor, and u is subharmonic",
            "n_sampled": res["n_sampled"], "n_with_ball": res["n_with_ball"],
            "n_violations": res["n_violations"], "tol": res["tol"],
            "subharmonic_min": res["subharmonic_min"],
            "verdict": PASS if ok else FINDING}


def _mass_records(sol: Solution, cfg) -> list:
    g = sol.u.grid
    h = g.h
    p = _anchor_point(sol)
    cap = min(0.25, _edge_margin(g, p) - 2 * h)
    radii = _dyadic(8 * h, cap)
    recs = []
    if radii:
        recs.append(verify.laplacian_mass_report(
            sol.u, p, radii, band_max_ratio=cfg.checks["band_max_ratio"]))
    c = np.asarray(sol.spec.disk.center, float)
    ray = p - c
    dist = float(np.hypot(*ray))
    mid = c + ray / dist * (sol.spec.disk.radius + dist) / 2.0
    gap_cap = (dist - sol.spec.disk.radius) / 2.0 * 0.8
    radii_in = _dyadic(8 * h, min(gap_cap, 0.25))
    if radii_in:
        recs.append(verify.laplacian_mass_report(sol.u, mid, radii_in,
                                                 mode="interior"))
    return recs


def _green_record(sol: Solution, cfg) -> dict:
    pts = sol.fb_points[np.unique(np.linspace(
        0, len(sol.fb_points) - 1, 5).astype(int))]
    h = sol.u.grid.h
    r = cfg.checks["green_r"]
    r = min(r, min(_edge_margin(sol.u.grid, p) for p in pts) - 2 * h)
    return verify.green_identity_report(
        sol.u, pts, r, tol_factor=cfg.checks["green_tol_factor"])


def _probe_record(sol: Solution, cfg) -> dict:
    p = _anchor_point(sol)
    h = sol.u.grid.h
    r_win = min(cfg.checks["probe_r"], _edge_margin(sol.u.grid, p) - 2 * h)
    return verify.two_component_exclusion_probe(
        sol, p, cfg.checks["probe_eps"], r_win)


def _monotonicity_records(cfg, grid):
    from .fields import arc_pair, equality_pair
    kind = cfg.checks["monotonicity"]
    if kind == "off":
        return [], None
    u1, u2 = equality_pair(grid) if kind == "equality" else arc_pair(grid)
    a, b, n = cfg.checks["j_radii"]
    xa, xb, ya, yb = grid.bounds()
    b = min(b, min(-xa, xb, -ya, yb) - 2 * grid.h)
    radii = np.linspace(a, b, int(n))
    rec = verify.monotonicity_J(u1, u2, (0.0, 0.0), radii)
    series = {"R": [s.R for s in rec["samples"]],
              "J": [s.J for s in rec["samples"]],
              "t1": [s.t1 for s in rec["samples"]],
              "t2": [s.t2 for s in rec["samples"]],
              "energy1": [s.energy1 for s in rec["samples"]],
              "energy2": [s.energy2 for s in rec["samples"]]}
    slim = {k: v for k, v in rec.items() if k != "samples"}
    slim["pair"] = kind
    return [slim], series


def _density_series(sol: Solution, cfg) -> dict:
    from .geometry import density_profile
    h = sol.u.grid.h
    radii = _dyadic(8 * h, cfg.checks["r_max_density"])
    p = _anchor_point(sol)
    prof = density_profile(sol.u, p, radii, threshold=sol.theta_pos)
    return {"r": [row[0] for row in prof],
            "frac_pos": [row[1] for row in prof],
            "frac_zero": [row[2] for row in prof]}


def _mock_solution(cfg: ExperimentConfig, h: float) -> Solution:
    grid = make_grid(cfg.spec.rect, h)
    mock = cfg.mock
    if mock["kind"] == "zero_island":
        const = _constant_data(cfg)
        require(const is not None, "CONFIG_INVALID",
                "mock.kind zero_island needs constant g and f")
        rs = radial_solution(cfg.spec.disk.radius, const[0], const[1])
        fld = zero_island_field(grid, rs, mock.get("center", (1.28, 0.0)),
                                mock.get("radius", 0.08))
    else:
        fld = two_strip_field(grid, mock.get("center", (0.0, 0.0)),
                              mock.get("gap", 0.05))
    return solution_from_field(fld, cfg.spec, cfg.params_for(h))


def run_single(cfg: ExperimentConfig, h: float,
               sol: Solution | None = None) -> HRun:
    """Solve (or build the mock) at one spacing and run its battery.

    A prebuilt Solution skips the solve: that is how externally supplied
    fields enter the battery."""
    if sol is None:
        sol = _mock_solution(cfg, h) if cfg.mock is not None \
            else solve_largest_subsolution(cfg.spec, cfg.params_for(h))
    run_checks = cfg.checks["run"]
    records = []
    series = {}
    if "fbc_residual" in run_checks and cfg.mock is None:
        records.append(_fbc_record(sol))
    if "viscosity" in run_checks:
        records.append(_viscosity_record(sol, cfg.checks["viscosity_tol"]))
    if "lipschitz" in run_checks:
        records.append(verify.lipschitz_report(
            [sol], stability_tol=cfg.checks["stability_tol"]))
    if "nondegeneracy" in run_checks:
        records.append(verify.nondegeneracy_report(
            [sol], n_points=cfg.checks["n_points"],
            r_max=cfg.checks["r_max_nondeg"],
            kappa_min=cfg.checks["kappa_min"],
            stability_tol=cfg.checks["stability_tol"]))
    if "laplacian_mass" in run_checks:
        records.extend(_mass_records(sol, cfg))
    if "density" in run_checks:
        records.append(verify.density_report(
            sol, n_points=cfg.checks["n_points"],
            r_max=cfg.checks["r_max_density"],
            lo=cfg.checks["density_lo"], hi=cfg.checks["density_hi"],
            inscribed_min=cfg.checks["inscribed_min"]))
        series["density"] = _density_series(sol, cfg)
    if "zero_audit" in run_checks:
        records.append(verify.zero_audit_report(sol))
    if "green_identity" in run_checks:
        records.append(_green_record(sol, cfg))
    if "two_component" in run_checks:
        records.append(_probe_record(sol, cfg))
    if "radius" in run_checks and cfg.checks["radius_target"] is not None \
            and cfg.mock is None:
        records.append(_radius_record(sol, cfg))
    if "monotonicity" in run_checks:
        recs, j_series = _monotonicity_records(cfg, sol.u.grid)
        records.extend(recs)
        if j_series:
            series["j_curve"] = j_series

    env = {"h": h, "spec_sha256": cfg.digest(),
           "solver": {"max_sweeps": sol.params.max_sweeps,
                      "band_factor": sol.params.band_factor,
                      "method": sol.params.method, "init": sol.params.init,
                      "route": sol.route},
           "version": __version__}
    report = verify.assemble_report(records, env=env)
    series["fb_polyline"] = {"x": [float(v) for v in sol.fb_points[:, 0]],
                             "y": [float(v) for v in sol.fb_points[:, 1]]}
    series["disk"] = {"center": [float(c) for c in cfg.spec.disk.center],
                      "radius": cfg.spec.disk.radius}
    report["series"] = series
    report["artifacts"] = {"solution_csv": "solution.csv",
                           "fb_polyline_csv": "fb_polyline.csv"}
    return HRun(h=h, sol=sol, report=report)


def _cross_grid_records(cfg, runs) -> list:
    records = []
    sols = [run.sol for run in runs]
    run_checks = cfg.checks["run"]
    if len(sols) >= 2:
        if "lipschitz" in run_checks:
            records.append(verify.lipschitz_report(
                sols, stability_tol=cfg.checks["stability_tol"]))
        if "nondegeneracy" in run_checks:
            records.append(verify.nondegeneracy_report(
                sols, n_points=cfg.checks["n_points"],
                r_max=cfg.checks["r_max_nondeg"],
                kappa_min=cfg.checks["kappa_min"],
                stability_tol=cfg.checks["stability_tol"]))
        if "fbc_residual" in run_checks and cfg.mock is None:
            rows = []
            ok = True
            for a, b in zip(runs, runs[1:]):
                ra = fbc_residual(a.sol)["max_abs"]
                rb = fbc_residual(b.sol)["max_abs"]
                ratio = ra / rb if rb > 0 else float("inf")
                rows.append({"h_coarse": a.h, "h_fine": b.h,
                             "max_coarse": ra, "max_fine": rb,
                             "ratio": ratio})
                ok = ok and ratio >= cfg.checks["decay_min"]
            records.append({
                "name": "fbc_residual_decay",
                "claim": "the boundary condition defect shrinks under "
                         "grid refinement",
                "rows": rows, "decay_min": cfg.checks["decay_min"],
                "verdict": PASS if ok else FAIL})
    if "arc_table" in run_checks:
        records.append(verify.arc_eigenvalue_bound(cfg.checks["alpha_list"]))
    return records


def execute(cfg: ExperimentConfig, threads=None) -> ExperimentResult:
    """Run the whole refinement sweep and assemble all reports."""
    result = ExperimentResult(cfg=cfg)
    workers = min(_thread_count(threads), len(cfg.hs))
    if workers <= 1:
        runs = [run_single(cfg, h) for h in cfg.hs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(lambda h: run_single(cfg, h), cfg.hs))
    result.runs = runs
    cross = _cross_grid_records(cfg, runs)
    env = {"h_list": list(cfg.hs), "spec_sha256": cfg.digest(),
           "version": __version__}
    if cross:
        result.summary = verify.assemble_report(cross, env=env)
    else:
        result.summary = {"checks": [], "summary": {"pass": 0, "fail": 0,
                                                    "finding": 0}, "env": env}
    return result


def _write(path: str, text: str):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise FbpError("IO_FAILURE", f"cannot write {path}: {exc}")


def write_artifacts(result: ExperimentResult, out_dir: str | None = None,
                    with_plots: bool = True) -> list:
    """Emit all per-h artifacts plus the run summary; returns the paths."""
    from .plots import render_plot
    out = out_dir or result.cfg.out_dir
    paths = []
    for idx, run in enumerate(result.runs):
        sub = os.path.join(out, f"h{idx}")
        os.makedirs(sub, exist_ok=True)
        field_to_csv(run.sol.u, os.path.join(sub, "solution.csv"))
        _write(os.path.join(sub, "fb_polyline.csv"),
               run.sol.fb_polyline_csv())
        _write(os.path.join(sub, "iterations.json"),
               run.sol.iteration_log_json())
        _write(os.path.join(sub, "report.json"),
               verify.report_json(run.report))
        paths.extend(os.path.join(sub, name) for name in
                     ("solution.csv", "fb_polyline.csv", "iterations.json",
                      "report.json"))
        series = run.report.get("series", {})
        if "j_curve" in series:
            s = series["j_curve"]
            rows = ["R,J,t1,t2,energy1,energy2"]
            for k in range(len(s["R"])):
                rows.append(",".join("%.17g" % s[key][k] for key in
                                     ("R", "J", "t1", "t2", "energy1",
                                      "energy2")))
            _write(os.path.join(sub, "j_curve.csv"), "\n".join(rows) + "\n")
            paths.append(os.path.join(sub, "j_curve.csv"))
        if "density" in series:
            s = series["density"]
            rows = ["r,frac_pos,frac_zero"]
            for k in range(len(s["r"])):
                rows.append(",".join("%.17g" % s[key][k] for key in
                                     ("r", "frac_pos", "frac_zero")))
            _write(os.path.join(sub, "density.csv"), "\n".join(rows) + "\n")
            paths.append(os.path.join(sub, "density.csv"))
        if with_plots:
            for kind, name in (("FB_POLYLINE", "fb_polyline.svg"),
                               ("FIELD_HEATMAP", "field.svg"),
                               ("DENSITY", "density.svg"),
                               ("J_CURVE", "j_curve.svg")):
                try:
                    render_plot(run.report, kind, os.path.join(sub, name),
                                report_dir=sub)
                    paths.append(os.path.join(sub, name))
                except FbpError as exc:
                    if exc.code != "SERIES_MISSING":
                        raise
    _write(os.path.join(out, "summary.json"),
           verify.report_json(result.summary))
    paths.append(os.path.join(out, "summary.json"))
    return paths
