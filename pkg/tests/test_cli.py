import json
from pathlib import Path

import pytest

import fbp_lab
from fbp_lab.cli import main

CONFIG_DIR = Path(fbp_lab.__file__).parent / "configs"

FAST_CFG = """\
[domain]
rect = -2.5 2.5 -2.5 2.5
disk_radius = 1

[data]
g = 1
f = 2
lam = 2
Lam = 2

[grid]
h = 0.015625

[checks]
run = fbc_residual radius density monotonicity zero_audit
radius_target = auto
"""


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli_run")
    cfg = base / "fast.cfg"
    cfg.write_text(FAST_CFG)
    out = base / "out"
    rc = main(["run", str(cfg), "--out", str(out), "--threads", "1"])
    assert rc == 0
    return {"cfg": cfg, "out": out}


@pytest.fixture(scope="module")
def planted_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_planted") / "out"
    rc = main(["run", str(CONFIG_DIR / "planted_defect.cfg"),
               "--out", str(out), "--no-plots"])
    assert rc == 2
    return out


def test_run_writes_reports_and_figures(run_dir):
    h0 = run_dir["out"] / "h0"
    for name in ("solution.csv", "fb_polyline.csv", "iterations.json",
                 "report.json", "fb_polyline.svg", "field.svg",
                 "density.svg", "j_curve.svg"):
        assert (h0 / name).exists(), name
    assert (run_dir["out"] / "summary.json").exists()
    report = json.loads((h0 / "report.json").read_text())
    assert report["summary"]["fail"] == 0
    assert {r["verdict"] for r in report["checks"]} == {"PASS"}


def test_planted_run_prints_the_finding(planted_dir, capsys):
    rc = main(["run", str(CONFIG_DIR / "planted_defect.cfg"),
               "--out", str(planted_dir), "--no-plots"])
    assert rc == 2
    out = capsys.readouterr().out
    assert "FINDING" in out
    assert "zero_component_audit" in out
    assert "1 finding" in out


def test_missing_config_is_an_error(tmp_path, capsys):
    rc = main(["run", str(tmp_path / "nope.cfg")])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error: IO_FAILURE")


def test_invalid_config_is_an_error(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text(FAST_CFG + "\n[extras]\nx = 1\n")
    rc = main(["run", str(bad)])
    assert rc == 1
    err = capsys.readouterr().err
    assert err.startswith("error: CONFIG_INVALID")
    assert "extras" in err


@pytest.mark.parametrize("kind", ["J_CURVE", "DENSITY", "FB_POLYLINE",
                                  "FIELD_HEATMAP"])
def test_plot_renders_each_kind_deterministically(run_dir, tmp_path, kind):
    report = run_dir["out"] / "h0" / "report.json"
    a = tmp_path / "a.svg"
    b = tmp_path / "b.svg"
    assert main(["plot", str(report), "--kind", kind, "--out", str(a)]) == 0
    assert main(["plot", str(report), "--kind", kind, "--out", str(b)]) == 0
    assert a.read_text().startswith("<?xml")
    assert a.read_bytes() == b.read_bytes()


def test_plot_without_the_series_is_an_error(planted_dir, capsys):
    report = planted_dir / "h0" / "report.json"
    rc = main(["plot", str(report), "--kind", "J_CURVE"])
    assert rc == 1
    assert "SERIES_MISSING" in capsys.readouterr().err


def test_verify_checks_an_exported_field(run_dir, capsys):
    field = run_dir["out"] / "h0" / "solution.csv"
    rc = main(["verify", str(field), "--spec", str(run_dir["cfg"])])
    assert rc == 0
    out_path = run_dir["out"] / "h0" / "solution.report.json"
    assert out_path.exists()
    report = json.loads(out_path.read_text())
    assert report["env"]["solver"]["route"] == "external"
    assert {r["verdict"] for r in report["checks"]} == {"PASS"}
    assert str(out_path) in capsys.readouterr().out


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert fbp_lab.__version__ in capsys.readouterr().out
