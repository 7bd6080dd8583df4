"""End-to-end acceptance battery.

Each test covers one release criterion and prints a single verdict line
so the run log doubles as the acceptance checklist.  Session fixtures
supply the four reference solves (two data sets at two spacings); the
timing-sensitive criterion does its own fresh solve.
"""

import time
from fractions import Fraction
from pathlib import Path

import numpy as np

import fbp_lab
from conftest import C2_STAR, R_STAR, radial_spec
from fbp_lab.barriers import radial_solution
from fbp_lab.battery import execute
from fbp_lab.config import load_config
from fbp_lab.fields import arc_pair, equality_pair, half_plane_field, \
    radial_field, zero_island_field
from fbp_lab.grid import make_grid
from fbp_lab.solver import (SolverParams, ac_energy_minimize,
                            check_viscosity_subsolution, fbc_residual,
                            scaled_solution, solution_from_field,
                            solve_largest_subsolution)
from fbp_lab.verify import (arc_eigenvalue_bound, density_report,
                            green_identity_report, laplacian_mass_report,
                            lipschitz_report, monotonicity_J,
                            nondegeneracy_report, report_json,
                            route_agreement_report, zero_audit_report)

CONFIG_DIR = Path(fbp_lab.__file__).parent / "configs"
H64 = 2.0 ** -6
H128 = 2.0 ** -7


def _verdict(n: int, ok: bool, desc: str) -> bool:
    print(f"[criterion {n:02d}] {'PASS' if ok else 'FAIL'} - {desc}")
    return ok


def _radii(sol):
    return np.hypot(sol.fb_points[:, 0], sol.fb_points[:, 1])


def test_criterion_01_benchmark_radius_and_runtime():
    t0 = time.perf_counter()
    sol = solve_largest_subsolution(radial_spec(), SolverParams(h=H128))
    dt = time.perf_counter() - t0
    err = abs(float(np.mean(_radii(sol))) - R_STAR)
    ok = sol.converged and err <= 2 * H128 and dt <= 60.0
    assert _verdict(1, ok, f"constant-data boundary radius err {err:.2e} "
                           f"(cap {2 * H128:.2e}), solve {dt:.1f}s")


def test_criterion_02_flux_defect_decays(bench64, bench128):
    a = fbc_residual(bench64)["max_abs"]
    b = fbc_residual(bench128)["max_abs"]
    ratio = a / b
    ok = ratio >= 1.5
    assert _verdict(2, ok, f"gradient-condition defect {a:.3f} -> {b:.3f}, "
                           f"decay x{ratio:.2f} (need >= 1.5)")


def test_criterion_03_viscosity_certificate(bench128):
    clean = check_viscosity_subsolution(bench128)
    halved = check_viscosity_subsolution(scaled_solution(bench128, 0.5))
    ok = (clean["n_violations"] == 0 and clean["subharmonic_ok"]
          and clean["n_with_ball"] >= 20
          and halved["n_with_ball"] > 0
          and halved["n_violations"] == halved["n_with_ball"])
    assert _verdict(3, ok, f"0/{clean['n_with_ball']} tangent-ball "
                           f"violations; halved field flagged at "
                           f"{halved['n_violations']}/{halved['n_with_ball']}")


def test_criterion_04_boundary_slope_constant(bench64, bench128):
    rep = lipschitz_report([bench64, bench128])
    c2 = [e["C2"] for e in rep["entries"]]
    drift = abs(c2[1] - c2[0]) / max(c2)
    ok = (rep["verdict"] == "PASS"
          and abs(c2[-1] - C2_STAR) <= 0.10 * C2_STAR
          and drift <= 0.15)
    assert _verdict(4, ok, f"near-boundary slope {c2[-1]:.3f} vs "
                           f"{C2_STAR:.3f}, refinement drift {drift:.1%}")


def test_criterion_05_growth_floor_both_data_sets(bench64, bench128,
                                                  mod64, mod128):
    reps = [nondegeneracy_report([bench64, bench128]),
            nondegeneracy_report([mod64, mod128])]
    ok = all(r["verdict"] == "PASS" for r in reps)
    kmin = min(min(e["kappa"], e["kappa_component"])
               for r in reps for e in r["entries"])
    floor = max(e["kappa_min"] for r in reps for e in r["entries"])
    ok = ok and all(
        min(e["kappa"], e["kappa_component"]) >= e["kappa_min"]
        for r in reps for e in r["entries"])
    assert _verdict(5, ok, f"windowed growth rate >= {kmin:.3f} "
                           f"against floors up to {floor:.3f}")


def test_criterion_06_mass_ratio_band(bench128):
    h = bench128.params.h
    pts = bench128.fb_points
    p = pts[int(np.argmin(np.abs(np.arctan2(pts[:, 1], pts[:, 0]))))]
    rep = laplacian_mass_report(bench128.u, p, [8 * h, 16 * h, 0.2])
    m, M = rep["band"]
    hp = laplacian_mass_report(
        half_plane_field(make_grid((-1, 1, -1, 1), H128)),
        (0.0, 0.0), [0.0625, 0.125, 0.25])
    hp_ok = all(abs(row["ratio"] - 2.0) <= 0.2 for row in hp["rows"])
    ok = rep["verdict"] == "PASS" and M / m <= 4.0 and hp_ok
    assert _verdict(6, ok, f"boundary measure mass/r in [{m:.2f}, {M:.2f}] "
                           f"(ratio {M / m:.2f}); half-plane reproduces 2")


def test_criterion_07_representation_formula(bench128):
    pts = bench128.fb_points
    pts = pts[np.unique(np.linspace(0, len(pts) - 1, 5).astype(int))]
    rep = green_identity_report(bench128.u, pts, 0.3)
    ok = rep["verdict"] == "PASS" and rep["max_residual"] <= rep["tol"]
    assert _verdict(7, ok, f"balance residual {rep['max_residual']:.2e} "
                           f"within {rep['tol']:.2e} on 5 boundary balls")


def test_criterion_08_phase_density_bounds(bench128, mod128):
    reps = [density_report(bench128), density_report(mod128)]
    lo = min(min(r["min_frac_pos"], r["min_frac_zero"]) for r in reps)
    insc = min(r["min_inscribed"] for r in reps)
    ok = all(r["verdict"] == "PASS" for r in reps) and lo >= 0.1 \
        and insc >= 0.05
    assert _verdict(8, ok, f"both phase fractions >= {lo:.2f} in every "
                           f"window; inscribed zero ball >= {insc:.2f}")


def test_criterion_09_no_interior_voids(bench128, mod128):
    clean = [zero_audit_report(bench128), zero_audit_report(mod128)]
    grid = make_grid(radial_spec().rect, H64)
    planted = zero_audit_report(zero_island_field(
        grid, radial_solution(1.0, 1.0, 2.0), (1.28, 0.0), 0.08))
    ok = all(r["verdict"] == "PASS" and not r["violations"] for r in clean) \
        and planted["verdict"] == "FINDING" and len(planted["violations"]) >= 1
    assert _verdict(9, ok, "computed solutions have no enclosed dead zones; "
                           "a planted one is flagged")


def test_criterion_10_product_functional():
    g = make_grid((-2.5, 2.5, -2.5, 2.5), 2.0 ** -5)
    h = g.h
    radii = np.linspace(0.3, 2.0, 20)
    eq = monotonicity_J(*equality_pair(g), (0.0, 0.0), radii)
    target = np.pi ** 2 / 4.0
    eq_ok = all(
        abs(s.J - target) <= 10.0 * max(64, int(np.ceil(
            2 * np.pi * s.R / h))) ** -2 * s.J
        for s in eq["samples"])
    arc = monotonicity_J(*arc_pair(g), (0.0, 0.0), radii)
    J = arc["J"]
    arc_ok = len(J) == 20 and all(b > a for a, b in zip(J, J[1:]))
    tab = arc_eigenvalue_bound([Fraction(1, 2), Fraction(1, 4)])
    tab_ok = (tab["rows"][0]["slope_sum"] == Fraction(2)
              and tab["rows"][1]["slope_sum"] == Fraction(8, 3))
    ok = eq_ok and arc_ok and tab_ok
    assert _verdict(10, ok, "two-phase functional flat at pi^2/4, strictly "
                            "increasing for the unequal split, slope table "
                            "exact")


def test_criterion_11_independent_routes_agree(bench64):
    energy = ac_energy_minimize(radial_spec(), SolverParams(h=H64))
    rep = route_agreement_report(bench64, energy)
    agree = rep["verdict"] == "PASS" and rep["area_symdiff"] <= rep["tol"]
    other = solution_from_field(
        radial_field(bench64.u.grid, radial_solution(1.0, 1.0, 0.8)),
        radial_spec(), SolverParams(h=H64))
    flagged = route_agreement_report(bench64, other)["verdict"] == "FINDING"
    ok = agree and flagged
    assert _verdict(11, ok, f"positivity sets differ by "
                            f"{rep['area_symdiff']:.2e} (strip allowance "
                            f"{rep['tol']:.2e}); larger gaps surface as "
                            f"findings")


def test_criterion_12_reports_are_reproducible():
    path = str(CONFIG_DIR / "benchmark_radial.cfg")
    first = execute(load_config(path))
    second = execute(load_config(path))
    per_h = [report_json(a.report) == report_json(b.report)
             for a, b in zip(first.runs, second.runs)]
    ok = (len(first.runs) == len(second.runs) == 2 and all(per_h)
          and report_json(first.summary) == report_json(second.summary)
          and first.exit_code() == 0)
    assert _verdict(12, ok, "independent runs of one config emit "
                            "byte-identical reports at every spacing")
