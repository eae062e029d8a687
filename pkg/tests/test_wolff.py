import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plaplace.measures import Atomic, RadialProfile, segment
from plaplace.spectra import InvalidParameterError
from plaplace.wolff import (
    DomainError,
    WolffParams,
    annulus_index,
    dirac_wolff,
    four_term_split,
    fundamental_constant,
    kernel_integral,
    km_sandwich_check,
    newton_wolff,
    wolff_potential,
    wolff_upper_report,
)


@pytest.mark.parametrize("n", [3, 4, 6])
@pytest.mark.parametrize("p", [1.5, 2.0, 2.5, 3.0])
@pytest.mark.parametrize("dist,r", [(0.1, 1.0), (0.5, 0.7), (1e-4, 2.0)])
def test_dirac_closed_form(n, p, dist, r):
    x = np.zeros(n)
    y = np.zeros(n)
    y[0] = dist
    w = wolff_potential(Atomic.dirac(y, 2.0), x, WolffParams(p, r, 1e-10))
    want = dirac_wolff(n, p, dist, r, 2.0)
    assert w.value == pytest.approx(want, rel=1e-9)
    assert w.lower <= want * (1 + 1e-12) and want <= w.upper * (1 + 1e-12)


def test_dirac_outside_radius_is_zero():
    w = wolff_potential(Atomic.dirac([2.0, 0.0, 0.0]), np.zeros(3), WolffParams(2.0, 1.0))
    assert w.value == 0.0


def test_atom_at_point_diverges():
    w = wolff_potential(Atomic.dirac([0.0, 0.0, 0.0]), np.zeros(3), WolffParams(2.0, 1.0))
    assert math.isinf(w.value)


def test_kernel_integral_p_equals_n_is_log():
    assert float(kernel_integral(0.1, 1.0, 3, 3.0)) == pytest.approx(math.log(10.0))


def test_monotone_bracket_without_exact_pieces():
    mu = Atomic(np.random.default_rng(0).uniform(-1, 1, (40, 3)))
    x = np.array([0.05, -0.1, 0.2])
    exact = wolff_potential(mu, x, WolffParams(2.5, 1.0, 1e-10))
    brk = wolff_potential(mu, x, WolffParams(2.5, 1.0, 1e-6), exact_pieces=False)
    assert brk.lower <= exact.value <= brk.upper
    assert brk.relative_gap <= 1e-6 * 1.0001


def test_newton_agreement():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1, 1, (50, 4))
    w = rng.uniform(0.1, 1.0, 50)
    x = rng.uniform(-1, 1, 4)
    got = wolff_potential(Atomic(pts, w), x, WolffParams(2.0, 1.5, 1e-11)).value
    assert got == pytest.approx(newton_wolff(pts, w, x, 4, 1.5), rel=1e-9)


@pytest.mark.parametrize("n,p,m", [(3, 2.0, 2.0), (4, 2.5, 3.0), (5, 3.0, 2.5)])
def test_power_law_measure(n, p, m):
    c = 0.7
    gamma = (m - n + p) / (p - 1)
    mu = RadialProfile.power_law(np.zeros(n), m, 1.0, c)
    w = wolff_potential(mu, np.zeros(n), WolffParams(p, 0.5, 1e-10))
    assert w.value == pytest.approx(c ** (1 / (p - 1)) * 0.5**gamma / gamma, rel=1e-8)


def test_p_above_n_rejected():
    with pytest.raises(InvalidParameterError):
        wolff_potential(Atomic.dirac([1.0, 0.0]), np.zeros(2), WolffParams(3.0, 1.0))
    with pytest.raises(InvalidParameterError):
        WolffParams(1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        WolffParams(2.0, 0.0)


@pytest.mark.parametrize("d,i", [(0.75, 0), (0.5, 1), (0.3, 1), (0.01, 6)])
def test_annulus_index(d, i):
    assert annulus_index([d, 0.0], [0.0, 0.0]) == i


def test_annulus_index_at_center():
    with pytest.raises(DomainError):
        annulus_index([0.0, 0.0], [0.0, 0.0])


def test_four_term_split_sums_and_bounds():
    mu = segment(np.array([-1.0, 0, 0, 0]), np.array([1.0, 0, 0, 0]), 200, focus=1.0, h_min=2.0**-12)
    rng = np.random.default_rng(2)
    for _ in range(10):
        v = rng.normal(size=4)
        x = 2.0 ** -rng.uniform(3, 7) * v / np.linalg.norm(v)
        s = four_term_split(mu, x, np.zeros(4), 1.0, 1, 2.5, 1e-9)
        assert s.sum == pytest.approx(s.total, rel=1e-7)
        assert s.outer <= s.outer_bound * (1 + 1e-9)
        assert s.middle <= s.middle_bound * (1 + 1e-9)
        assert s.near <= s.near_bound * (1 + 1e-9)


def test_four_term_split_rejects_inner_cutoff():
    mu = Atomic.dirac([0.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        four_term_split(mu, [0.75, 0.0, 0.0], [0.0, 0.0, 0.0], 1.0, 1, 2.0)


@pytest.mark.parametrize("n,p", [(3, 2.0), (4, 2.5), (5, 3.0)])
def test_sandwich_for_fundamental_solution(n, p):
    beta = (n - p) / (p - 1)
    amp = fundamental_constant(n, p) ** (-1 / (p - 1))

    def u(pts):
        return amp * np.linalg.norm(pts, axis=1) ** -beta

    mu = Atomic.dirac(np.zeros(n))
    for d in (1e-3, 1e-2, 1e-1):
        x = np.zeros(n)
        x[0] = d
        s = km_sandwich_check(u, mu, x, 0.25, p, 128, seed=0)
        assert 0 < s.lower_ratio < math.inf
        assert 0 < s.upper_ratio < math.inf


def test_upper_report_on_segment():
    mu = segment(-np.eye(4)[0], np.eye(4)[0], 200, focus=1.0, h_min=2.0**-14)
    rep = wolff_upper_report(mu, np.zeros(4), 2.5, 1.0, 0.2, 0.5, range(3, 7), 16)
    assert rep.growth_m == pytest.approx(1.0, abs=0.05)
    assert len(rep.annuli) == 4
    assert rep.uniform_ok
    rows = rep.to_csv().strip().splitlines()
    assert len(rows) == 5 and rows[0].startswith("i,")
    assert rep.to_dict()["uniform_ok"] is True


def test_upper_report_rejects_large_growth():
    mu = segment(-np.eye(3)[0], np.eye(3)[0], 50)
    with pytest.raises(InvalidParameterError):
        wolff_upper_report(mu, np.zeros(3), 2.5, 1.0, 0.2, 0.5, range(3, 5), 8)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(1.3, 3.0))
def test_potential_monotone_in_radius(r1, r2, p):
    mu = Atomic(np.array([[0.1, 0.0, 0.0], [0.0, 0.3, 0.0], [0.0, 0.0, -0.6]]))
    a, b = sorted((r1, r2))
    x = np.zeros(3)
    wa = wolff_potential(mu, x, WolffParams(p, a, 1e-10)).value
    wb = wolff_potential(mu, x, WolffParams(p, b, 1e-10)).value
    assert wa <= wb * (1 + 1e-9)
