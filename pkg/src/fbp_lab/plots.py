"""Report-driven SVG rendering.

Every figure is produced from series embedded in a report document (or
a field CSV the report references), with a fixed viewport and no
timestamps, so identical reports give byte-identical SVG files.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "fbp-lab"

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import FbpError, require  # noqa: E402
from .grid import field_from_csv  # noqa: E402

PLOT_KINDS = ("J_CURVE", "DENSITY", "FB_POLYLINE", "FIELD_HEATMAP")


def _series(report: dict, key: str) -> dict:
    series = report.get("series", {})
    require(key in series, "SERIES_MISSING",
            f"report has no {key!r} series; available: {sorted(series)}")
    return series[key]


def _save(fig, out_path: str) -> str:
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path


def render_plot(report: dict, kind: str, out_path: str,
                report_dir: str = ".") -> str:
    """Render one plot kind from a report document to an SVG file."""
    require(kind in PLOT_KINDS, "SERIES_MISSING",
            f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    if kind == "J_CURVE":
        s = _series(report, "j_curve")
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        ax.plot(s["R"], s["J"], marker="o", ms=3, lw=1.2, color="#1f5fa8")
        ax.set_xlabel("R")
        ax.set_ylabel("J(R)")
        ax.set_title("product functional vs radius")
        ax.grid(True, lw=0.3, alpha=0.5)
        return _save(fig, out_path)
    if kind == "DENSITY":
        s = _series(report, "density")
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        ax.plot(s["r"], s["frac_pos"], marker="o", ms=3, lw=1.2,
                color="#b3412c", label="positive phase")
        ax.plot(s["r"], s["frac_zero"], marker="s", ms=3, lw=1.2,
                color="#2c6eb3", label="zero phase")
        ax.axhline(0.5, color="0.6", lw=0.6, ls="--")
        ax.set_ylim(0.0, 1.0)
        ax.set_xlabel("ball radius r")
        ax.set_ylabel("volume fraction")
        ax.set_title("phase density at the free boundary")
        ax.legend(loc="best")
        ax.grid(True, lw=0.3, alpha=0.5)
        return _save(fig, out_path)
    if kind == "FB_POLYLINE":
        s = _series(report, "fb_polyline")
        fig, ax = plt.subplots(figsize=(5.5, 5.5))
        ax.plot(s["x"], s["y"], ".", ms=1.5, color="#1f5fa8")
        disk = report.get("series", {}).get("disk")
        if disk:
            th = np.linspace(0, 2 * np.pi, 361)
            ax.plot(disk["center"][0] + disk["radius"] * np.cos(th),
                    disk["center"][1] + disk["radius"] * np.sin(th),
                    color="0.4", lw=0.8)
        ax.set_aspect("equal")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_title("free boundary")
        ax.grid(True, lw=0.3, alpha=0.5)
        return _save(fig, out_path)
    # FIELD_HEATMAP: field loaded from the CSV the report references
    art = report.get("artifacts", {})
    require("solution_csv" in art, "SERIES_MISSING",
            "report references no solution field")
    path = os.path.join(report_dir, art["solution_csv"])
    require(os.path.exists(path), "SERIES_MISSING",
            f"field file {path} is missing")
    fld = field_from_csv(path)
    xa, xb, ya, yb = fld.grid.bounds()
    fig, ax = plt.subplots(figsize=(6.2, 5.2))
    im = ax.imshow(fld.values, origin="lower", extent=(xa, xb, ya, yb),
                   cmap="viridis", interpolation="nearest")
    fig.colorbar(im, ax=ax, shrink=0.9)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("solution field")
    return _save(fig, out_path)
