import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plaplace.capacity import Grid
from plaplace.measures import (
    Atomic,
    GridDensity,
    NoMassError,
    RadialProfile,
    cantor_dust,
    growth_exponent,
    k_plane_patch,
    segment,
    unit_ball_volume,
)
from plaplace.spectra import InvalidParameterError


def test_unit_ball_volume():
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


def test_atomic_closed_and_open_balls():
    mu = Atomic([[1.0, 0.0], [0.0, 2.0]], [0.5, 1.5])
    cum = mu.radial_cumulative([0.0, 0.0])
    assert float(cum.closed(1.0)) == 0.5
    assert float(cum.open(1.0)) == 0.0
    assert float(cum.closed(2.0)) == 2.0
    assert mu.ball_mass([0.0, 0.0], 1.0) == 0.5
    assert cum.step


def test_atomic_validation():
    with pytest.raises(InvalidParameterError):
        Atomic([[0.0, 0.0]], [-1.0])
    with pytest.raises(InvalidParameterError):
        Atomic([[0.0, 0.0]], [1.0, 2.0])
    z = Atomic.zero(3)
    assert z.total_mass == 0.0
    assert z.ball_mass(np.zeros(3), 10.0) == 0.0


def test_atomic_sum():
    a = Atomic.dirac([0.0, 0.0, 0.0], 1.0) + Atomic.dirac([1.0, 0.0, 0.0], 2.0)
    assert a.total_mass == 3.0
    assert a.ball_mass([0.0, 0.0, 0.0], 0.5) == 1.0


def test_segment_ball_mass_exact():
    mu = segment(np.zeros(3), np.array([1.0, 0.0, 0.0]), 1000)
    assert mu.ball_mass(np.zeros(3), 0.2) == pytest.approx(0.2, abs=1e-12)
    assert mu.total_mass == pytest.approx(1.0)


def test_graded_segment_weights_sum_to_length():
    mu = segment(-np.eye(4)[0], np.eye(4)[0], 200, focus=1.0, h_min=2.0**-12)
    assert mu.total_mass == pytest.approx(2.0)
    # Cells shrink toward the focus at arclength 1, i.e. the origin.
    d = np.linalg.norm(mu.points, axis=1)
    assert mu.weights[np.argmin(d)] < 1e-3


@pytest.mark.parametrize("m,c", [(1.0, 1.0), (2.0, 0.3), (2.7, 2.0)])
def test_power_law_profile_exact(m, c):
    mu = RadialProfile.power_law(np.zeros(3), m, 1.0, c)
    for t in (1e-6, 1e-3, 0.5, 1.0):
        assert mu.ball_mass(np.zeros(3), t) == pytest.approx(c * t**m, rel=1e-14)
    assert mu.ball_mass(np.zeros(3), 5.0) == pytest.approx(c)


def test_growth_exponent_power_law():
    mu = RadialProfile.power_law(np.zeros(3), 2.0, 1.0)
    fit = growth_exponent(mu, np.zeros(3), 1e-3, 0.5)
    assert fit.m == pytest.approx(2.0, abs=1e-9)
    assert fit.fit_residual < 1e-9


def test_growth_exponent_plane_patch():
    mu = k_plane_patch(np.zeros(3), np.eye(3)[:2], 1.0, 200)
    fit = growth_exponent(mu, np.zeros(3), 0.05, 0.5)
    assert fit.m == pytest.approx(2.0, abs=0.1)


def test_growth_exponent_lebesgue_grid():
    g = Grid.from_bounds((-1.0,) * 3, (1.0,) * 3, 1 / 40)
    mu = GridDensity(g, np.ones(g.shape))
    fit = growth_exponent(mu, np.zeros(3), 0.1, 0.6)
    assert fit.m == pytest.approx(3.0, abs=0.05)


def test_growth_exponent_empty_raises():
    mu = Atomic.dirac([5.0, 0.0, 0.0])
    with pytest.raises(NoMassError):
        growth_exponent(mu, np.zeros(3), 1e-3, 0.5)


def test_offcenter_profile_mass_matches_monte_carlo():
    mu = RadialProfile.power_law(np.zeros(3), 3.0, 1.0, unit_ball_volume(3))  # uniform on the unit ball
    x = np.array([0.5, 0.0, 0.0])
    t = 0.3
    # Uniform density 1: mass equals the volume of B(x, t) inside the unit ball, here all of it.
    assert mu.ball_mass(x, t) == pytest.approx(unit_ball_volume(3) * t**3, rel=1e-8)
    # Ball poking out of the support.
    x = np.array([0.9, 0.0, 0.0])
    rng = np.random.default_rng(0)
    pts = x + t * rng.uniform(-1, 1, (400_000, 3))
    inside = (np.linalg.norm(pts - x, axis=1) <= t) & (np.linalg.norm(pts, axis=1) <= 1.0)
    mc = inside.mean() * (2 * t) ** 3
    assert mu.ball_mass(x, t) == pytest.approx(mc, rel=0.01)


def test_grid_density_uniform_mass():
    g = Grid.from_bounds((-1.0,) * 2, (1.0,) * 2, 1 / 50)
    mu = GridDensity(g, np.full(g.shape, 2.0))
    assert mu.ball_mass(np.zeros(2), 0.5) == pytest.approx(2.0 * math.pi * 0.25, rel=0.02)


@pytest.mark.parametrize("ratio,depth", [(1 / 3, 6), (0.25, 5)])
def test_cantor_dust(ratio, depth):
    c = cantor_dust(ratio, depth)
    assert len(c.points) == 2**depth
    assert c.total_mass == pytest.approx(1.0)
    assert c.set_dim == pytest.approx(math.log(2) / math.log(1 / ratio))
    assert np.all((c.points >= 0) & (c.points <= 1))


def test_plane_patch_area():
    mu = k_plane_patch(np.zeros(4), [[1.0, 1.0, 0, 0], [0, 0, 1.0, 0]], 0.5, 20)
    assert mu.total_mass == pytest.approx(1.0)
    assert mu.set_dim == 2
    assert mu.descriptor["generator"] == "k-plane-patch"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 3.0), min_size=1, max_size=20), st.floats(0.0, 4.0))
def test_atomic_cumulative_monotone(dists, t):
    pts = np.zeros((len(dists), 3))
    pts[:, 0] = dists
    mu = Atomic(pts)
    cum = mu.radial_cumulative(np.zeros(3))
    assert float(cum.open(t)) <= float(cum.closed(t))
    assert float(cum.closed(t)) <= float(cum.closed(t + 0.1))
    assert float(cum.closed(t)) == sum(d <= t for d in dists)
