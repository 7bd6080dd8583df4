import json
from fractions import Fraction

import numpy as np
import pytest

from conftest import C2_STAR, R_STAR, RECT, radial_spec
from fbp_lab.barriers import radial_solution
from fbp_lab.errors import FbpError
from fbp_lab.fields import (arc_pair, equality_pair, half_plane_field,
                            radial_field, two_strip_field, zero_island_field)
from fbp_lab.grid import make_grid
from fbp_lab.solver import SolverParams, scaled_solution, solution_from_field
from fbp_lab.verify import (arc_eigenvalue_bound, assemble_report,
                            density_report, green_identity_report,
                            laplacian_mass_report, lipschitz_report,
                            monotonicity_J, nondegeneracy_report, report_json,
                            route_agreement_report,
                            two_component_exclusion_probe, zero_audit_report)


def test_lipschitz_constants_near_the_radial_slope(bench64, bench128):
    rep = lipschitz_report([bench64, bench128])
    assert rep["verdict"] == "PASS"
    for e in rep["entries"]:
        assert e["C2"] == pytest.approx(C2_STAR, rel=0.10)
        assert e["C1"] >= e["C2"] * 0.5
    a, b = rep["entries"]
    assert abs(a["C2"] - b["C2"]) <= 0.15 * max(a["C2"], b["C2"])


def test_lipschitz_constants_scale_invariant(bench64):
    base = lipschitz_report([bench64])["entries"][0]
    both = lipschitz_report([bench64, scaled_solution(bench64, 1.05)])
    assert both["entries"][1]["C2"] == pytest.approx(1.05 * base["C2"], rel=1e-9)
    # a 2x jump in the constants is flagged
    bad = lipschitz_report([bench64, scaled_solution(bench64, 2.0)])
    assert bad["verdict"] == "FAIL"


def test_nondegeneracy_on_both_grids(bench64, bench128):
    rep = nondegeneracy_report([bench64, bench128])
    assert rep["verdict"] == "PASS"
    for e in rep["entries"]:
        assert e["kappa_min"] == pytest.approx(0.5 * np.sqrt(2.0))
        assert 1.25 <= e["kappa"] <= 1.47
        assert e["kappa_component"] == pytest.approx(e["kappa"], rel=1e-9)
        assert e["radii"][0] == pytest.approx(8 * e["h"])


def test_nondegeneracy_radius_floor(bench64):
    with pytest.raises(FbpError) as exc:
        nondegeneracy_report([bench64], r_max=2 * bench64.params.h)
    assert exc.value.code == "RADIUS_TOO_SMALL"


def test_mass_ratio_band_on_benchmark(bench128):
    h = bench128.params.h
    p = bench128.fb_points[int(np.argmin(np.abs(
        np.arctan2(bench128.fb_points[:, 1], bench128.fb_points[:, 0]))))]
    rep = laplacian_mass_report(bench128, p, [8 * h, 16 * h, 32 * h])
    assert rep["verdict"] == "PASS"
    m, M = rep["band"]
    assert M / m <= 4.0
    for row in rep["rows"]:
        assert row["ratio"] == pytest.approx(2.7, abs=0.4)


def test_mass_ratio_half_plane_is_two():
    fld = half_plane_field(make_grid((-1, 1, -1, 1), 2.0 ** -7))
    rep = laplacian_mass_report(fld, (0.0, 0.0), [0.0625, 0.125, 0.25])
    for row in rep["rows"]:
        assert row["ratio"] == pytest.approx(2.0, rel=0.10)


def test_interior_mass_vanishes(bench128):
    rep = laplacian_mass_report(bench128, (1.25, 0.0), [0.0625, 0.125],
                                mode="interior")
    assert rep["name"] == "laplacian_mass_interior"
    assert rep["verdict"] == "PASS"


def test_mass_ball_must_fit():
    fld = half_plane_field(make_grid((-1, 1, -1, 1), 2.0 ** -5))
    with pytest.raises(FbpError) as exc:
        laplacian_mass_report(fld, (0.9, 0.0), [0.5])
    assert exc.value.code == "BALL_OUTSIDE_GRID"


def test_density_bounds_on_benchmark(bench128):
    rep = density_report(bench128)
    assert rep["verdict"] == "PASS"
    assert 0.1 <= rep["min_frac_pos"] <= 0.9
    assert 0.1 <= rep["min_frac_zero"] <= 0.9
    assert rep["min_inscribed"] >= 0.05


def test_density_bounds_translation_invariant(bench64):
    # shifting the window center along the boundary keeps the fractions
    rep = density_report(bench64, n_points=4)
    rep2 = density_report(bench64, n_points=16)
    assert abs(rep["min_frac_pos"] - rep2["min_frac_pos"]) < 0.15


def test_zero_audit_clean_and_planted():
    g = make_grid(RECT, 2.0 ** -6)
    rs = radial_solution(1.0, 1.0, 2.0)
    assert zero_audit_report(radial_field(g, rs))["verdict"] == "PASS"
    planted = zero_audit_report(zero_island_field(g, rs, (1.28, 0.0), 0.08))
    assert planted["verdict"] == "FINDING"
    assert len(planted["violations"]) == 1
    assert planted["violations"][0]["diameter"] < 0.25


def test_green_identity_at_boundary_balls(bench128):
    idx = np.unique(np.linspace(0, len(bench128.fb_points) - 1, 5).astype(int))
    rep = green_identity_report(bench128.u, bench128.fb_points[idx], 0.3)
    assert rep["verdict"] == "PASS"
    assert rep["tol"] == pytest.approx(5 * bench128.params.h)
    assert rep["max_residual"] <= rep["tol"]


def test_equality_pair_J_is_flat():
    g = make_grid((-2, 2, -2, 2), 2.0 ** -5)
    u1, u2 = equality_pair(g)
    radii = np.linspace(0.3, 1.8, 12)
    rep = monotonicity_J(u1, u2, (0.0, 0.0), radii)
    assert rep["verdict"] == "PASS"
    target = np.pi ** 2 / 4.0
    for s in rep["samples"]:
        assert s.J == pytest.approx(target, rel=1e-12)
        assert s.energy1 == pytest.approx(s.energy2, rel=1e-12)
        assert s.t1 == pytest.approx(1.0, abs=0.05)
        assert s.t2 == pytest.approx(1.0, abs=0.05)


def test_arc_pair_J_strictly_increases():
    g = make_grid((-2, 2, -2, 2), 2.0 ** -5)
    u1, u2 = arc_pair(g)
    radii = np.linspace(0.3, 1.8, 20)
    rep = monotonicity_J(u1, u2, (0.0, 0.0), radii)
    assert rep["verdict"] == "PASS"
    J = rep["J"]
    assert all(b > a for a, b in zip(J, J[1:]))
    tts = [(s.t1, s.t2) for s in rep["samples"]]
    for t1, t2 in tts:
        assert t1 == pytest.approx(0.5, abs=0.05)   # quarter-plane arc
        assert t2 == pytest.approx(1.5, abs=0.05)   # its complement


def test_overlapping_supports_rejected():
    g = make_grid((-2, 2, -2, 2), 2.0 ** -4)
    u1, _ = equality_pair(g)
    with pytest.raises(FbpError) as exc:
        monotonicity_J(u1, u1, (0.0, 0.0), [0.5, 1.0])
    assert exc.value.code == "OVERLAPPING_SUPPORTS"


def test_meeting_point_must_lie_on_both_boundaries():
    g = make_grid((-2, 2, -2, 2), 2.0 ** -4)
    u1, u2 = equality_pair(g)
    with pytest.raises(FbpError) as exc:
        monotonicity_J(u1, u2, (0.0, 1.0), [0.5, 1.0])
    assert exc.value.code == "CENTER_NOT_ON_BOTH_BOUNDARIES"


def test_arc_slope_table_is_exact():
    rep = arc_eigenvalue_bound([Fraction(1, 2), Fraction(1, 4)])
    assert rep["verdict"] == "PASS"
    rows = rep["rows"]
    assert rows[0]["slope_sum"] == Fraction(2)
    assert rows[1]["slope_sum"] == Fraction(8, 3)
    for row in rows:
        assert row["eig_rel_err"] <= 1e-5


def test_arc_alpha_must_be_a_proper_fraction():
    with pytest.raises(FbpError) as exc:
        arc_eigenvalue_bound([Fraction(3, 2)])
    assert exc.value.code == "ALPHA_OUT_OF_RANGE"


def test_two_component_probe_accepts_the_benchmark(bench64):
    p = bench64.fb_points[int(np.argmin(np.abs(
        np.arctan2(bench64.fb_points[:, 1], bench64.fb_points[:, 0]))))]
    rep = two_component_exclusion_probe(bench64, p, [0.1, 0.2], 0.5)
    assert rep["verdict"] == "PASS"
    assert rep["max_touching"] <= 1


def test_two_component_probe_flags_the_two_strip_mock():
    fld = two_strip_field(make_grid((-1, 1, -1, 1), 2.0 ** -6), (0.0, 0.0), 0.05)
    rep = two_component_exclusion_probe(fld, (0.0, 0.0), [0.2], 0.5)
    assert rep["verdict"] == "FINDING"
    assert rep["max_touching"] == 2
    row = rep["rows"][0]
    assert "traces" in row
    for r, t1, t2 in row["traces"]:
        assert t1 + t2 == pytest.approx(2.0, abs=0.5)


def test_probe_window_must_fit():
    fld = half_plane_field(make_grid((-1, 1, -1, 1), 2.0 ** -5))
    with pytest.raises(FbpError) as exc:
        two_component_exclusion_probe(fld, (0.8, 0.0), [0.2], 0.5)
    assert exc.value.code == "WINDOW_OUTSIDE_GRID"


def test_route_agreement_pass_and_finding(bench64):
    same = route_agreement_report(bench64, bench64)
    assert same["verdict"] == "PASS"
    assert same["area_symdiff"] == 0.0
    assert same["perimeter"] == pytest.approx(2 * np.pi * R_STAR, rel=0.1)
    other = solution_from_field(
        radial_field(bench64.u.grid, radial_solution(1.0, 1.0, 0.8)),
        radial_spec(), SolverParams(h=bench64.params.h))
    mismatch = route_agreement_report(bench64, other)
    assert mismatch["verdict"] == "FINDING"
    assert mismatch["area_symdiff"] > mismatch["tol"]


def test_assemble_report_sorts_and_counts():
    recs = [{"name": "b", "verdict": "PASS"},
            {"name": "a", "verdict": "FINDING"},
            {"name": "c", "verdict": "FAIL"}]
    rep = assemble_report(recs, env={"h": 0.1})
    assert [r["name"] for r in rep["checks"]] == ["a", "b", "c"]
    assert rep["summary"] == {"pass": 1, "fail": 1, "finding": 1}
    assert rep["env"] == {"h": 0.1}


def test_assemble_report_rejects_bad_records():
    with pytest.raises(FbpError) as exc:
        assemble_report([])
    assert exc.value.code == "SPEC_INVALID"
    with pytest.raises(FbpError) as exc:
        assemble_report([{"name": "x", "verdict": "MAYBE"}])
    assert exc.value.code == "SPEC_INVALID"


def test_report_json_is_canonical():
    a = report_json({"z": 1.0, "a": {"y": np.float64(2.5), "x": np.int64(3)}})
    b = report_json(json.loads(a))
    assert a == b
    assert json.loads(a) == {"z": 1.0, "a": {"y": 2.5, "x": 3}}
