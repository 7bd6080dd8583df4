"""Command line front end.

    fbp-lab run <config.cfg>            solve + battery + artifacts
    fbp-lab plot <report.json> --kind K render one SVG from a report
    fbp-lab verify <field.csv> --spec C battery on an external field

Exit codes: 0 all checks PASS, 2 at least one FINDING, 1 on any FAIL or
error.  FBP_LAB_THREADS caps refinement-sweep parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .errors import FbpError


def _print_records(report: dict, label: str):
    for rec in report.get("checks", []):
        print(f"{rec['verdict']:8s} {rec['name']} [{label}]")


def _cmd_run(args) -> int:
    from .battery import execute, write_artifacts
    from .config import load_config
    cfg = load_config(args.config)
    if args.out:
        cfg.out_dir = args.out
    result = execute(cfg, threads=args.threads)
    write_artifacts(result, with_plots=not args.no_plots)
    for run in result.runs:
        _print_records(run.report, f"h={run.h:g}")
    _print_records(result.summary, "sweep")
    s = {"pass": 0, "fail": 0, "finding": 0}
    for rec in result.all_records():
        s[rec["verdict"].lower()] += 1
    print(f"checks: {s['pass']} pass, {s['fail']} fail, "
          f"{s['finding']} finding -> {cfg.out_dir}")
    return result.exit_code()


def _cmd_plot(args) -> int:
    from .plots import render_plot
    try:
        with open(args.report, "r", encoding="utf-8") as fh:
            report = json.load(fh)
    except OSError as exc:
        raise FbpError("IO_FAILURE", f"cannot read report {args.report}: {exc}")
    except json.JSONDecodeError as exc:
        raise FbpError("IO_FAILURE", f"report {args.report} is not JSON: {exc}")
    out = args.out or os.path.join(
        os.path.dirname(args.report) or ".", args.kind.lower() + ".svg")
    render_plot(report, args.kind, out,
                report_dir=os.path.dirname(args.report) or ".")
    print(out)
    return 0


def _cmd_verify(args) -> int:
    from .battery import run_single
    from .config import load_config
    from .grid import field_from_csv
    from .solver import solution_from_field
    from .verify import report_json
    cfg = load_config(args.spec)
    fld = field_from_csv(args.field)
    h = fld.grid.h
    sol = solution_from_field(fld, cfg.spec, cfg.params_for(h))
    run = run_single(cfg, h, sol=sol)
    _print_records(run.report, f"h={h:g}")
    out = args.out or (os.path.splitext(args.field)[0] + ".report.json")
    try:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(report_json(run.report))
    except OSError as exc:
        raise FbpError("IO_FAILURE", f"cannot write {out}: {exc}")
    print(out)
    verdicts = {rec["verdict"] for rec in run.report["checks"]}
    if "FAIL" in verdicts:
        return 1
    if "FINDING" in verdicts:
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fbp-lab",
        description="free boundary solver and verification battery")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured experiment")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="override the configured output dir")
    p_run.add_argument("--threads", type=int,
                       help="parallel refinement entries (default: "
                            "FBP_LAB_THREADS or 4)")
    p_run.add_argument("--no-plots", action="store_true")
    p_run.set_defaults(fn=_cmd_run)

    p_plot = sub.add_parser("plot", help="render one SVG from a report")
    p_plot.add_argument("report")
    p_plot.add_argument("--kind", required=True,
                        choices=["J_CURVE", "DENSITY", "FB_POLYLINE",
                                 "FIELD_HEATMAP"])
    p_plot.add_argument("--out")
    p_plot.set_defaults(fn=_cmd_plot)

    p_ver = sub.add_parser("verify", help="battery on an external field")
    p_ver.add_argument("field")
    p_ver.add_argument("--spec", required=True, help="config with the "
                       "problem data the field claims to solve")
    p_ver.add_argument("--out", help="report path (default: next to field)")
    p_ver.set_defaults(fn=_cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FbpError as exc:
        print(f"error: {exc.code}: {exc.detail}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
