import numpy as np
import pytest

from fbp_lab.barriers import radial_solution
from fbp_lab.errors import FbpError
from fbp_lab.fields import (half_plane_field, radial_field, two_strip_field,
                            zero_island_field)
from fbp_lab.geometry import (Component, angular_traces, density_profile,
                              find_tangent_balls, label_components,
                              perimeter_boxcount, positivity_threshold,
                              zero_component_audit)
from fbp_lab.grid import ScalarField, make_grid

H = 2.0 ** -6
RS = radial_solution(1.0, 1.0, 2.0)


def _grid():
    return make_grid((-2.5, 2.5, -2.5, 2.5), H)


def test_positivity_threshold_scales_with_max():
    g = make_grid((0, 1, 0, 1), 0.25)
    fld = ScalarField(g, np.full(g.shape, 3.0))
    assert positivity_threshold(fld) == pytest.approx(3e-12)


def test_label_components_radial():
    dec = label_components(radial_field(_grid(), RS))
    assert len(dec.pos_components) == 1
    assert len(dec.zero_components) == 1
    assert dec.zero_components[0].touches_edge
    comp = dec.pos_components[0]
    assert comp.area == pytest.approx(np.pi * RS.R ** 2, rel=0.02)
    assert comp.diameter == pytest.approx(2 * RS.R, rel=0.02)


def test_label_components_two_strips():
    fld = two_strip_field(make_grid((-1, 1, -1, 1), 0.0625), (0.0, 0.0), 0.2)
    dec = label_components(fld)
    assert len(dec.pos_components) == 2
    assert len(dec.zero_components) == 1       # one slab through the window
    assert all(c.touches_edge for c in dec.pos_components)


def test_tangent_balls_on_half_plane():
    fld = half_plane_field(make_grid((-1, 1, -1, 1), 0.0625))
    recs = find_tangent_balls(fld, (0.0, 0.0), [0.25, 0.5], side="exterior")
    assert len(recs) == 2
    for rec in recs:
        assert rec.gap <= fld.grid.h
        assert rec.wrong_side_nodes == 0
        assert rec.center[1] < 0               # exterior balls sit below
    inner = find_tangent_balls(fld, (0.0, 0.0), [0.25], side="interior")
    assert inner and inner[0].center[1] > 0


def test_tangent_balls_small_radii_skipped():
    fld = half_plane_field(make_grid((-1, 1, -1, 1), 0.0625))
    assert find_tangent_balls(fld, (0.0, 0.0), [0.01]) == []


def test_tangent_balls_point_off_boundary():
    fld = half_plane_field(make_grid((-1, 1, -1, 1), 0.0625))
    with pytest.raises(FbpError) as exc:
        find_tangent_balls(fld, (0.0, 0.5), [0.25])
    assert exc.value.code == "POINT_NOT_ON_BOUNDARY"


def test_tangent_balls_need_room():
    fld = half_plane_field(make_grid((-1, 1, -1, 1), 0.0625))
    with pytest.raises(FbpError) as exc:
        find_tangent_balls(fld, (0.9, 0.0), [0.5])
    assert exc.value.code == "BALL_OUTSIDE_GRID"


def test_density_half_plane_is_half():
    fld = half_plane_field(make_grid((-1, 1, -1, 1), 0.03125))
    prof = density_profile(fld, (0.0, 0.0), [0.25, 0.5])
    for r, fp, fz in prof:
        assert fp == pytest.approx(0.5, abs=0.08)
        assert fz == pytest.approx(0.5, abs=0.08)
        assert fp + fz == pytest.approx(1.0, abs=0.1)


def test_density_profile_errors():
    fld = half_plane_field(make_grid((-1, 1, -1, 1), 0.0625))
    with pytest.raises(FbpError) as exc:
        density_profile(fld, (0.0, 0.0), [0.05])
    assert exc.value.code == "RADIUS_TOO_SMALL"
    with pytest.raises(FbpError) as exc:
        density_profile(fld, (0.9, 0.0), [0.5])
    assert exc.value.code == "WINDOW_OUTSIDE_GRID"


def test_perimeter_boxcount_tracks_circle_length():
    dec = label_components(radial_field(_grid(), RS))
    comp = dec.pos_components[0]
    # the positive phase is the full ball, so its rim is one circle
    want = 2 * np.pi * RS.R
    for eps, n, scaled in perimeter_boxcount(comp, [0.05, 0.1]):
        assert scaled == pytest.approx(want, rel=0.35)


def test_perimeter_boxcount_empty_component():
    g = _grid()
    empty = Component(label=1, nodes=np.empty((0, 2), int), grid=g,
                      touches_edge=False)
    with pytest.raises(FbpError) as exc:
        perimeter_boxcount(empty, [0.1])
    assert exc.value.code == "EMPTY_COMPONENT"


def test_angular_traces_two_strips():
    fld = two_strip_field(make_grid((-1, 1, -1, 1), 0.03125), (0.0, 0.0), 0.1)
    dec = label_components(fld)
    labs = tuple(c.label for c in dec.pos_components)
    out = angular_traces(dec, labs, (0.0, 0.0), [0.5])
    r, t1, t2 = out[0]
    # each strip covers a bit less than a half-plane's arc
    assert 0.6 < t1 < 1.0 and 0.6 < t2 < 1.0
    assert t1 + t2 < 2.0


def test_angular_traces_unknown_label():
    dec = label_components(radial_field(_grid(), RS))
    with pytest.raises(FbpError) as exc:
        angular_traces(dec, (1, 99), (0.0, 0.0), [0.5])
    assert exc.value.code == "COMPONENT_COUNT_MISMATCH"


def test_full_audit_clean_vs_planted_island():
    clean = zero_component_audit(radial_field(_grid(), RS))
    assert clean["mode"] == "full"
    assert clean["violations"] == []
    planted = zero_component_audit(
        zero_island_field(_grid(), RS, (1.28, 0.0), 0.08))
    assert len(planted["violations"]) == 1
    v = planted["violations"][0]
    assert not v.touches_edge
    assert v.area == pytest.approx(np.pi * 0.08 ** 2, rel=0.5)


def test_windowed_audit_reports_inscribed_ball():
    fld = radial_field(_grid(), RS)
    out = zero_component_audit(fld, center=(RS.R, 0.0), r=0.3)
    assert out["mode"] == "window"
    assert out["violations"] == []
    assert out["touching"]                      # the ambient zero sea
    assert out["inscribed_radius_normalized"] > 0.3


def test_windowed_audit_radius_floor():
    fld = radial_field(_grid(), RS)
    with pytest.raises(FbpError) as exc:
        zero_component_audit(fld, center=(RS.R, 0.0), r=2 * H)
    assert exc.value.code == "RADIUS_TOO_SMALL"
