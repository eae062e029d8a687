import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plaplace import capacity as cap
from plaplace.geometry import (
    Annulus,
    Ball,
    BallUnion,
    Box,
    CellMask,
    GeometryError,
    HalfSpace,
    Intersection,
    PlanePatch,
)
from plaplace.pdirichlet import TensorMesh, dirichlet_energy, minimize_energy, sphere_area
from plaplace.spectra import InvalidParameterError


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2 * math.pi)
    assert sphere_area(2) == pytest.approx(4 * math.pi)
    assert sphere_area(3) == pytest.approx(2 * math.pi**2)


@pytest.mark.parametrize("n,p", [(2, 1.5), (3, 2.0), (3, 2.5), (3, 3.0), (4, 2.5)])
def test_oracle_matches_radial_minimization(n, p):
    want = cap.spherical_condenser_oracle(n, p, 0.5, 2.0)
    got = cap.radial_energy_oracle(n, p, 0.5, 2.0, nodes=800)
    assert got == pytest.approx(want, rel=1e-4)


def test_oracle_newtonian():
    assert cap.spherical_condenser_oracle(3, 2.0, 1.0) == pytest.approx(4 * math.pi)
    assert cap.spherical_condenser_oracle(3, 2.0, 1.0, 2.0) == pytest.approx(8 * math.pi)


@pytest.mark.parametrize("args", [(1, 2.0, 1.0, 2.0), (3, 4.0, 1.0, 2.0), (3, 2.0, 2.0, 1.0), (3, 3.0, 1.0, math.inf)])
def test_oracle_validation(args):
    with pytest.raises(InvalidParameterError):
        cap.spherical_condenser_oracle(*args)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.floats(1.2, 6.0), st.floats(0.1, 1.0), st.floats(1.1, 4.0), st.floats(0.2, 5.0))
def test_oracle_scaling_law(n, p, r, ratio, lam):
    p = min(p, float(n))
    a = cap.spherical_condenser_oracle(n, p, lam * r, lam * r * ratio)
    b = cap.spherical_condenser_oracle(n, p, r, r * ratio)
    assert a == pytest.approx(lam ** (n - p) * b, rel=1e-9)


def test_dirichlet_energy_of_linear_field():
    x = np.linspace(0, 1, 11)
    mesh = TensorMesh.uniform([x, x])
    xx, yy = np.meshgrid(x, x, indexing="ij")
    u = 3 * xx + 4 * yy
    # Forward cells cover [0, 1]^2 minus the last row and column of weights.
    assert dirichlet_energy(mesh, u, 2.0) == pytest.approx(25.0)
    assert dirichlet_energy(mesh, u, 3.0) == pytest.approx(125.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 5.0])
def test_minimizer_is_linear_in_1d(p):
    x = np.linspace(0, 1, 41)
    fixed = np.zeros(41, dtype=bool)
    fixed[[0, -1]] = True
    vals = np.zeros(41)
    vals[0] = 1.0
    res = minimize_energy(TensorMesh.uniform([x]), fixed, vals, p)
    assert res.converged
    np.testing.assert_allclose(res.u, 1 - x, atol=1e-7)


def test_meridian_mesh_volume():
    z = np.linspace(-1, 1, 21)
    s = np.linspace(0, 1, 11)
    w = TensorMesh.meridian(z, s, 3).weights
    # A cylinder of radius 1 and height 2.
    assert w.sum() == pytest.approx(2 * math.pi)


@pytest.mark.parametrize("p", [2.0, 2.5])
def test_meridian_ball_capacity(p):
    h = 1 / 16
    g = cap.MeridianGrid.uniform(3, -2 - 4 * h, 2 + 4 * h, 2 + 4 * h, h)
    res = cap.solve_condenser(cap.Condenser((Ball((0.0,) * 3, 1.0),), Ball((0.0,) * 3, 2.0), g), p)
    oracle = cap.spherical_condenser_oracle(3, p, 1.0, 2.0)
    assert res.converged and res.resolved
    assert res.value == pytest.approx(oracle, rel=0.1)


def test_cartesian_disk_capacity_p_equals_n():
    g = cap.Grid.from_bounds((-1.0, -1.0), (1.0, 1.0), 1 / 48)
    res = cap.solve_condenser(cap.Condenser((Ball((0.0, 0.0), 0.25),), Ball((0.0, 0.0), 1.0), g), 2.0)
    assert res.value == pytest.approx(cap.spherical_condenser_oracle(2, 2.0, 0.25, 1.0), rel=0.08)


def test_discrete_monotonicity_and_subadditivity():
    g = cap.Grid.from_bounds((-1.0, -1.0), (1.0, 1.0), 1 / 32)
    omega = Ball((0.0, 0.0), 1.0)
    a, b = Ball((-0.2, 0.1), 0.15), Ball((0.25, -0.1), 0.2)
    for p in (2.0, 1.8):
        ca = cap.solve_condenser(cap.Condenser((a,), omega, g), p).value
        cb = cap.solve_condenser(cap.Condenser((b,), omega, g), p).value
        cu = cap.solve_condenser(cap.Condenser((a, b), omega, g), p).value
        small = cap.solve_condenser(cap.Condenser((a,), Ball((0.0, 0.0), 0.8), g), p).value
        assert max(ca, cb) <= cu * (1 + 1e-6)
        assert cu <= (ca + cb) * (1 + 1e-6)
        assert ca <= small * (1 + 1e-6)


def test_touching_boundary_raises():
    g = cap.Grid.from_bounds((-1.0, -1.0), (1.0, 1.0), 1 / 16)
    with pytest.raises(GeometryError):
        cap.solve_condenser(cap.Condenser((Ball((0.0, 0.0), 0.99),), Ball((0.0, 0.0), 1.0), g), 2.0)


def test_empty_condenser_has_zero_capacity():
    g = cap.Grid.from_bounds((-1.0, -1.0), (1.0, 1.0), 1 / 8)
    res = cap.solve_condenser(cap.Condenser((Ball((5.0, 5.0), 0.1),), Ball((0.0, 0.0), 1.0), g), 2.0)
    assert res.value == 0.0 and res.k_nodes == 0


def test_richardson_recovers_order():
    hs = (0.1, 0.05, 0.025)
    est = cap.richardson([2.0 + 3 * h**2 for h in hs], hs)
    assert est.order == pytest.approx(2.0)
    assert est.ratio == pytest.approx(4.0)
    assert est.extrapolated == pytest.approx(2.0)
    with pytest.raises(InvalidParameterError):
        cap.richardson([1.0, 2.0], hs[:2])


@pytest.mark.parametrize("n,p", [(3, 2.0), (4, 2.5), (5, 4.0)])
def test_level_set_analytic_equality(n, p):
    u = cap.truncated_green(n, p, 1.0)
    x = np.zeros((1, n))
    x[0, 0] = 1.0
    assert u(x)[0] == pytest.approx(0.0, abs=1e-14)
    for v in cap.level_set_analytic(n, p, 1.0, [0.1, 1.0, 10.0]):
        assert v.lhs == pytest.approx(1.0, rel=1e-12)
        assert v.ok


def test_discrete_measure_problem_is_positive():
    h = 1 / 32
    g = cap.MeridianGrid.uniform(3, -1 - 4 * h, 1 + 4 * h, 1 + 4 * h, h)
    u = cap.solve_measure_problem(g, Ball((0.0,) * 3, 1.0), [((0.0, 0.0, 0.0), 1.0)], 2.0)
    assert u.max() > 0 and u.min() >= -1e-12
    with pytest.raises(GeometryError):
        cap.solve_measure_problem(g, Ball((0.0,) * 3, 1.0), [((1.02, 0.0, 0.0), 1.0)], 2.0)


def test_ball_capacity_upper_bound():
    ub = cap.ball_capacity_upper(3, 2.0, (0.3, 0.0, 0.0), 0.2, Ball((0.0,) * 3, 1.0))
    assert ub == pytest.approx(cap.spherical_condenser_oracle(3, 2.0, 0.2, 0.7))
    assert math.isinf(cap.ball_capacity_upper(3, 2.0, (0.9, 0.0, 0.0), 0.2, Ball((0.0,) * 3, 1.0)))


def test_grid_from_bounds_is_symmetric():
    g = cap.Grid.from_bounds((-1.0, -1.0), (1.0, 1.0), 0.1)
    ax = g.axes()[0]
    np.testing.assert_allclose(ax, -ax[::-1], atol=1e-12)
    with pytest.raises(InvalidParameterError):
        cap.Grid((0.0,), 0.1, (2,))


# Geometry


def test_ball_open_and_closed():
    b = Ball((0.0, 0.0), 1.0)
    pts = [[1.0, 0.0], [0.5, 0.0]]
    assert b.contains(pts).tolist() == [True, True]
    assert b.contains(pts, closed=False).tolist() == [False, True]
    assert b.scaled(2.0, about=(1.0, 0.0)) == Ball((-1.0, 0.0), 2.0)
    with pytest.raises(GeometryError):
        Ball((0.0,), 0.0)


def test_box_and_annulus():
    bx = Box((0.0, 0.0), (1.0, 2.0))
    assert bx.contains([[1.0, 2.0], [0.5, 2.5]]).tolist() == [True, False]
    with pytest.raises(GeometryError):
        Box((0.0,), (0.0,))
    an = Annulus((0.0, 0.0), 0.5, 1.0)
    assert an.contains([[0.5, 0.0], [0.25, 0.0], [0.75, 0.0]]).tolist() == [True, False, True]
    assert an.contains([[0.5, 0.0]], closed=False).tolist() == [False]


def test_plane_patch_distance():
    pp = PlanePatch((0.0, 0.0, 0.0), ((2.0, 0.0, 0.0),), (1.0,))
    np.testing.assert_allclose(pp.basis[0], (1.0, 0.0, 0.0))
    d = pp.distance([[0.5, 0.3, 0.4], [2.0, 0.0, 0.0]])
    np.testing.assert_allclose(d, [0.5, 1.0])
    assert pp.with_thickness(0.6).contains([[0.5, 0.3, 0.4]])[0]


def test_union_halfspace_intersection():
    u = BallUnion((Ball((0.0, 0.0), 0.5), Ball((2.0, 0.0), 0.5)))
    assert len(u) == 2
    assert u.contains([[2.2, 0.0], [1.0, 0.0]]).tolist() == [True, False]
    hs = HalfSpace((0.0, 2.0), 1.0)
    assert hs.offset == pytest.approx(0.5)
    assert hs.contains([[0.0, 0.5], [0.0, 0.4]]).tolist() == [True, False]
    inter = Intersection((Ball((0.0, 0.0), 1.0), hs))
    assert inter.contains([[0.0, 0.9], [0.0, 1.1], [0.0, 0.1]]).tolist() == [True, False, False]


def test_cell_mask_nearest_node():
    g = cap.Grid.from_bounds((0.0, 0.0), (1.0, 1.0), 0.25, pad=0)
    mask = np.zeros(g.shape, dtype=bool)
    mask[0, 0] = True
    cm = CellMask(g, mask)
    assert cm.contains([[0.1, 0.1], [0.9, 0.9]]).tolist() == [True, False]
