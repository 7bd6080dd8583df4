"""Experiment configuration: line-oriented key = value files with
sections, parsed with configparser.  docs/config_format.md holds the
grammar and the full key reference.

Check tolerances and band constants live here as data (DEFAULT_CHECKS),
so a config can tighten or relax any of them without touching code.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import FbpError, require
from .expressions import parse_expression
from .solver import DiskRegion, ProblemSpec, SolverParams

_SECTIONS = {"domain", "data", "grid", "solver", "checks", "output", "mock"}
_KEYS = {
    "domain": {"rect", "disk_center", "disk_radius"},
    "data": {"g", "f", "lam", "Lam"},
    "grid": {"h"},
    "solver": {"max_sweeps", "band_factor", "fbc_tol", "method", "init",
               "smooth_w"},
    "checks": {"run", "n_points", "r_max_nondeg", "r_max_density",
               "kappa_min", "stability_tol", "band_max_ratio",
               "density_lo", "density_hi", "inscribed_min",
               "green_tol_factor", "green_r", "viscosity_tol",
               "decay_min", "radius_target", "radius_tol_cells",
               "monotonicity", "j_radii", "alpha_list", "probe_eps",
               "probe_r"},
    "output": {"dir"},
    "mock": {"kind", "center", "radius", "gap"},
}

ALL_CHECKS = ("fbc_residual", "viscosity", "lipschitz", "nondegeneracy",
              "laplacian_mass", "density", "zero_audit", "green_identity",
              "two_component", "radius", "monotonicity", "arc_table")

DEFAULT_CHECKS = {
    "run": list(ALL_CHECKS),
    "n_points": 16,
    "r_max_nondeg": 0.2,
    "r_max_density": 0.3,
    "kappa_min": None,          # 0.5 sqrt(lam)
    "stability_tol": 0.15,
    "band_max_ratio": 4.0,
    "density_lo": 0.1,
    "density_hi": 0.9,
    "inscribed_min": 0.05,
    "green_tol_factor": 5.0,
    "green_r": 0.3,
    "viscosity_tol": None,      # 0.1 sqrt(lam)
    "decay_min": 1.5,
    "radius_target": None,      # float, or "auto" for constant-data runs
    "radius_tol_cells": 2.0,
    "monotonicity": "equality",
    "j_radii": (0.3, 2.2, 20),
    "alpha_list": [Fraction(1, 2), Fraction(1, 4)],
    "probe_eps": [0.1, 0.2],
    "probe_r": 0.5,
}


@dataclass
class ExperimentConfig:
    spec: ProblemSpec
    hs: list
    solver_kwargs: dict
    checks: dict
    out_dir: str
    mock: dict | None
    g_source: str
    f_source: str
    raw_text: str
    path: str = ""

    def digest(self) -> str:
        return hashlib.sha256(self.raw_text.encode()).hexdigest()

    def params_for(self, h: float) -> SolverParams:
        return SolverParams(h=h, **self.solver_kwargs)


def _floats(s: str, n: int | None, where: str):
    try:
        vals = [float(tok) for tok in s.split()]
    except ValueError:
        raise FbpError("CONFIG_INVALID", f"{where}: expected numbers, got {s!r}")
    require(n is None or len(vals) == n, "CONFIG_INVALID",
            f"{where}: expected {n} numbers, got {len(vals)}")
    return vals


def _maybe_float(cp, sec, key):
    raw = cp.get(sec, key, fallback="").strip()
    if not raw:
        return None
    try:
        return float(raw)
    except ValueError:
        raise FbpError("CONFIG_INVALID", f"{sec}.{key}: expected a number, got {raw!r}")


def _check_f_range(f, lam, Lam, rect):
    xs = np.linspace(rect[0], rect[1], 101)
    ys = np.linspace(rect[2], rect[3], 101)
    X, Y = np.meshgrid(xs, ys)
    vals = f(np.stack((X, Y), axis=-1))
    tol = 1e-9 * max(abs(lam), abs(Lam), 1.0)
    require(float(np.min(vals)) >= lam - tol, "CONFIG_INVALID",
            f"data.f: dips to {float(np.min(vals)):.6g}, below the lam bound {lam}")
    require(float(np.max(vals)) <= Lam + tol, "CONFIG_INVALID",
            f"data.f: peaks at {float(np.max(vals)):.6g}, above the Lam bound {Lam}")


def load_config(path: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise FbpError("IO_FAILURE", f"cannot read config {path}: {exc}")
    try:
        cp.read_string(raw, source=path)
    except configparser.Error as exc:
        raise FbpError("CONFIG_INVALID", f"{path}: {exc}")

    for sec in cp.sections():
        require(sec in _SECTIONS, "CONFIG_INVALID", f"unknown section [{sec}]")
        for key in cp.options(sec):
            require(key in _KEYS[sec], "CONFIG_INVALID",
                    f"unknown key {sec}.{key}")
    for sec in ("domain", "data", "grid"):
        require(cp.has_section(sec), "CONFIG_INVALID", f"missing section [{sec}]")

    rect = tuple(_floats(cp.get("domain", "rect", fallback=""), 4, "domain.rect"))
    require(rect[0] < rect[1] and rect[2] < rect[3], "CONFIG_INVALID",
            "domain.rect: need xmin < xmax and ymin < ymax")
    center = tuple(_floats(cp.get("domain", "disk_center", fallback="0 0"), 2,
                           "domain.disk_center"))
    r_disk = _maybe_float(cp, "domain", "disk_radius")
    require(r_disk is not None and r_disk > 0, "CONFIG_INVALID",
            "domain.disk_radius: need a positive number")

    for key in ("g", "f", "lam", "Lam"):
        require(cp.has_option("data", key), "CONFIG_INVALID", f"missing data.{key}")
    lam = _maybe_float(cp, "data", "lam")
    Lam = _maybe_float(cp, "data", "Lam")
    require(lam is not None and Lam is not None and 0 < lam <= Lam,
            "CONFIG_INVALID", "data.lam, data.Lam: need 0 < lam <= Lam")
    g_source = cp.get("data", "g").strip()
    f_source = cp.get("data", "f").strip()
    g = parse_expression(g_source)
    f = parse_expression(f_source)
    _check_f_range(f, lam, Lam, rect)

    hs = _floats(cp.get("grid", "h", fallback=""), None, "grid.h")
    require(len(hs) >= 1 and all(v > 0 for v in hs), "CONFIG_INVALID",
            "grid.h: need at least one positive spacing")
    require(all(a > b for a, b in zip(hs, hs[1:])), "CONFIG_INVALID",
            "grid.h: spacings must be strictly decreasing")

    solver_kwargs = {}
    if cp.has_section("solver"):
        if cp.get("solver", "max_sweeps", fallback="").strip():
            solver_kwargs["max_sweeps"] = int(cp.get("solver", "max_sweeps"))
        for key in ("band_factor", "fbc_tol", "smooth_w"):
            val = _maybe_float(cp, "solver", key)
            if val is not None:
                solver_kwargs[key] = val
        for key in ("method", "init"):
            val = cp.get("solver", key, fallback="").strip()
            if val:
                require(val in (("direct", "relax") if key == "method"
                                else ("barrier", "collar")), "CONFIG_INVALID",
                        f"solver.{key}: unknown value {val!r}")
                solver_kwargs[key] = val

    checks = dict(DEFAULT_CHECKS)
    if cp.has_section("checks"):
        if cp.get("checks", "run", fallback="").strip():
            names = cp.get("checks", "run").split()
            for name in names:
                require(name in ALL_CHECKS, "CONFIG_INVALID",
                        f"checks.run: unknown check {name!r}")
            checks["run"] = names
        for key in ("n_points",):
            if cp.get("checks", key, fallback="").strip():
                checks[key] = int(cp.get("checks", key))
        for key in ("r_max_nondeg", "r_max_density", "kappa_min",
                    "stability_tol", "band_max_ratio", "density_lo",
                    "density_hi", "inscribed_min", "green_tol_factor",
                    "green_r", "viscosity_tol", "decay_min",
                    "radius_tol_cells", "probe_r"):
            val = _maybe_float(cp, "checks", key)
            if val is not None:
                checks[key] = val
        raw_target = cp.get("checks", "radius_target", fallback="").strip()
        if raw_target:
            checks["radius_target"] = "auto" if raw_target == "auto" \
                else float(raw_target)
        mono = cp.get("checks", "monotonicity", fallback="").strip()
        if mono:
            require(mono in ("off", "equality", "arc"), "CONFIG_INVALID",
                    f"checks.monotonicity: unknown value {mono!r}")
            checks["monotonicity"] = mono
        jr = cp.get("checks", "j_radii", fallback="").strip()
        if jr:
            parts = jr.split(":")
            require(len(parts) == 3, "CONFIG_INVALID",
                    "checks.j_radii: expected start:stop:count")
            checks["j_radii"] = (float(parts[0]), float(parts[1]), int(parts[2]))
        al = cp.get("checks", "alpha_list", fallback="").strip()
        if al:
            try:
                checks["alpha_list"] = [Fraction(tok) for tok in al.split()]
            except (ValueError, ZeroDivisionError):
                raise FbpError("CONFIG_INVALID",
                               f"checks.alpha_list: bad fraction in {al!r}")
        pe = cp.get("checks", "probe_eps", fallback="").strip()
        if pe:
            checks["probe_eps"] = _floats(pe, None, "checks.probe_eps")

    out_dir = cp.get("output", "dir", fallback="out").strip() or "out"

    mock = None
    if cp.has_section("mock"):
        kind = cp.get("mock", "kind", fallback="").strip()
        require(kind in ("zero_island", "two_strip"), "CONFIG_INVALID",
                f"mock.kind: unknown value {kind!r}")
        mock = {"kind": kind}
        if cp.get("mock", "center", fallback="").strip():
            mock["center"] = tuple(_floats(cp.get("mock", "center"), 2,
                                           "mock.center"))
        for key in ("radius", "gap"):
            val = _maybe_float(cp, "mock", key)
            if val is not None:
                mock[key] = val

    spec = ProblemSpec(rect=rect, disk=DiskRegion(center, r_disk),
                       g=g, f=f, lam=lam, Lam=Lam)
    return ExperimentConfig(spec=spec, hs=hs, solver_kwargs=solver_kwargs,
                            checks=checks, out_dir=out_dir, mock=mock,
                            g_source=g_source, f_source=f_source,
                            raw_text=raw, path=path)
