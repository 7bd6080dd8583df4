import numpy as np

from fbp_lab.barriers import radial_solution
from fbp_lab.fields import (arc_pair, equality_pair, half_plane_field,
                            radial_field, sample_scalar, two_strip_field,
                            zero_island_field)
from fbp_lab.grid import DIRICHLET, INTERIOR, make_grid

G = make_grid((-2.0, 2.0, -2.0, 2.0), 0.0625)


def test_sample_scalar_tags_edge():
    fld = sample_scalar(G, lambda x, y: x + y)
    assert np.all(fld.mask[0, :] == DIRICHLET)
    assert np.all(fld.mask[:, -1] == DIRICHLET)
    assert np.all(fld.mask[1:-1, 1:-1] == INTERIOR)
    X, Y = G.mesh()
    assert np.array_equal(fld.values, X + Y)


def test_radial_field_disk_is_dirichlet():
    rs = radial_solution(1.0, 1.0, 2.0)
    fld = radial_field(G, rs)
    X, Y = G.mesh()
    rho = np.hypot(X, Y)
    assert np.all(fld.mask[rho <= 1.0] == DIRICHLET)
    assert np.all(fld.values[rho <= 1.0] == 1.0)
    assert np.all(fld.values[rho >= rs.R] == 0.0)


def test_half_plane_and_equality_pair_are_complementary():
    u = half_plane_field(G)
    X, Y = G.mesh()
    assert np.array_equal(u.values, np.maximum(Y, 0.0))
    u1, u2 = equality_pair(G)
    assert np.all(u1.values * u2.values == 0.0)
    assert np.array_equal(u1.values + u2.values, np.abs(Y))


def test_arc_pair_supports_disjoint():
    u1, u2 = arc_pair(G)
    both = (u1.values > 0) & (u2.values > 0)
    assert not both.any()
    # u1 lives in the open first quadrant only
    X, Y = G.mesh()
    assert np.all(u1.values[(X < 0) | (Y < 0)] == 0.0)
    assert u1.values[(X > 0.5) & (Y > 0.5)].min() > 0


def test_two_strip_slab_is_dead():
    fld = two_strip_field(G, (0.0, 0.25), 0.125)
    X, Y = G.mesh()
    assert np.all(fld.values[np.abs(Y - 0.25) <= 0.125] == 0.0)
    assert np.all(fld.values[Y > 0.5] > 0)


def test_zero_island_forces_zero_patch():
    rs = radial_solution(1.0, 1.0, 2.0)
    fld = zero_island_field(G, rs, (1.28, 0.0), 0.08)
    X, Y = G.mesh()
    d = np.hypot(X - 1.28, Y)
    assert np.all(fld.values[d <= 0.08] == 0.0)
    clean = radial_field(G, rs)
    assert np.array_equal(fld.values[d > 0.1], clean.values[d > 0.1])
