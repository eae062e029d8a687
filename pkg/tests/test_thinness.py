import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plaplace.geometry import Ball, BallUnion, GeometryError
from plaplace.spectra import InvalidParameterError
from plaplace.thinness import (
    DyadicAnnuli,
    ball_chain,
    classify_series,
    find_escape_ray,
    p_thin_partial_sums,
    segment_hits_balls,
    segment_hits_balls_quadratic,
    separating_chain,
    wiener_partial_sums,
)


def test_dyadic_annuli():
    a = DyadicAnnuli((0.0, 0.0), 2, 4)
    assert list(a.indices()) == [2, 3, 4]
    assert (a.omega(2).r_in, a.omega(2).r_out) == (0.125, 0.25)
    assert (a.big_omega(2).r_in, a.big_omega(2).r_out) == (0.0625, 0.5)
    with pytest.raises(InvalidParameterError):
        DyadicAnnuli((0.0,), 3, 2)


def test_ball_chain_layout():
    E = ball_chain(2.0, 1.0, 3, i_min=1, i_max=5)
    assert len(E) == 5
    for i, b in enumerate(E.balls, start=1):
        assert b.center[0] == pytest.approx(0.75 * 2.0**-i)
        assert b.radius == pytest.approx(2.0 ** (-2 * i))
    with pytest.raises(GeometryError):
        ball_chain(1.0, 1.0, 3)


def test_separating_chain_radii():
    E = separating_chain(5, 4.0, 0.2, 2.0, 1, 4)
    r = [b.radius for b in E.balls]
    want = [0.2 * 2.0**-i * i**-2.0 for i in range(1, 5)]
    np.testing.assert_allclose(r, want)
    with pytest.raises(InvalidParameterError):
        separating_chain(3, 3.0)


@pytest.mark.parametrize(
    "terms,status",
    [
        ([2.0**-i for i in range(10)], "thin"),
        ([1.0] * 10, "not-thin"),
        ([0.0] * 10, "thin"),
        ([float(i) ** -2.5 for i in range(1, 40)], "thin"),
        ([1.0 / i for i in range(1, 40)], "not-thin"),
        ([float(i) ** -1.05 for i in range(1, 201)], "inconclusive"),
        ([1.0, 2.0], "inconclusive"),
    ],
)
def test_classify_series(terms, status):
    assert classify_series(range(1, len(terms) + 1), terms).status == status


def test_slowly_decaying_series_is_not_thin():
    i = np.arange(1, 60)
    v = classify_series(i, i**-0.5, floor_fraction=0.9)
    assert v.status == "not-thin"


def test_ball_chain_series_verdicts():
    # Radii 2^(-2i): the annulus terms drop geometrically.
    thin = p_thin_partial_sums(ball_chain(2.0, 1.0, 3), np.zeros(3), 2.0, range(1, 7))
    assert thin.thin
    # Past the first two (straddling) balls each term halves.
    r = thin.terms[3:] / thin.terms[2:-1]
    np.testing.assert_allclose(r, 0.5, atol=0.05)
    # Radii comparable to the annulus: terms bounded below.
    fat = p_thin_partial_sums(ball_chain(1.0, 0.25, 3), np.zeros(3), 2.0, range(1, 7))
    assert fat.verdict.status == "not-thin"
    d = fat.to_dict()
    assert d["kind"] == "annulus" and len(d["rows"]) == 6
    assert all(b.partial_sum >= a.partial_sum for a, b in zip(fat.rows, fat.rows[1:]))


def test_wiener_series_on_fat_chain():
    res = wiener_partial_sums(ball_chain(1.0, 0.25, 3), np.zeros(3), 2.0, range(1, 6))
    assert res.verdict.status == "not-thin"
    assert np.all(res.terms > 0)


def test_escape_from_thin_chain():
    E = ball_chain(2.0, 1.0, 4, i_max=30)
    res = find_escape_ray(E, np.zeros(4), 0.5, 256, seed=3)
    assert res.found and res.verified
    assert 0.0 < res.blocked_fraction < 1.0


def test_no_escape_when_enclosed():
    E = BallUnion((Ball((0.1, 0.0, 0.0), 0.5),))
    res = find_escape_ray(E, np.zeros(3), 0.5, 128)
    assert not res.found and res.blocked_fraction == 1.0


def test_escape_trivial_for_far_balls():
    res = find_escape_ray(BallUnion((Ball((5.0, 0.0), 0.1),)), np.zeros(2), 1.0)
    assert res.found and res.n_tested == 1


def test_escape_validation():
    with pytest.raises(InvalidParameterError):
        find_escape_ray(Ball((0.0, 0.0), 1.0), np.zeros(2), 1.0)
    with pytest.raises(InvalidParameterError):
        find_escape_ray(BallUnion(()), np.zeros(2), 0.0)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-1, 1), min_size=3, max_size=3),
    st.lists(st.floats(-1, 1), min_size=3, max_size=3),
    st.floats(0.05, 0.6),
    st.floats(0.1, 2.0),
)
def test_hit_tests_agree(c, d, r, t0):
    c = np.asarray(c)
    d = np.asarray(d)
    if np.linalg.norm(d) < 1e-3:
        return
    d = d / np.linalg.norm(d)
    fast = bool(segment_hits_balls(np.zeros(3), d, t0, c[None], np.array([r]))[0])
    slow = segment_hits_balls_quadratic(np.zeros(3), d, t0, c[None], np.array([r]))
    # Skip grazing configurations where rounding decides.
    rel = c
    tau = np.clip(rel @ d, 0, t0)
    gap = np.sqrt(max(rel @ rel - 2 * tau * (rel @ d) + tau**2, 0.0))
    if abs(gap - r) > 1e-9:
        assert fast == slow
