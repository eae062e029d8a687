import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plaplace.capacity import Grid
from plaplace.conformal import (
    GridField,
    LogForm,
    PlaneDistPower,
    RadialPower,
    SingularityError,
    conformal_ray_length,
    critical_exponent,
    curvature_at,
    kappa,
    limit_consistency,
    p_laplace_residual,
    p_laplacian,
    radial_p_laplacian,
)
from plaplace.spectra import InvalidParameterError


def round_sphere(n):
    """Stereographic chart of the unit sphere: phi = log(2 / (1 + |x|^2))."""

    def derivs(x):
        s = 1.0 + x @ x
        return math.log(2.0 / s), -2.0 * x / s, -2.0 * np.eye(n) / s + 4.0 * np.outer(x, x) / s**2

    return LogForm(n, derivs, label="sphere")


def random_point(rng, n, avoid=0.2):
    while True:
        x = rng.uniform(-1, 1, n)
        if np.linalg.norm(x) > avoid:
            return x


def test_kappa_and_q():
    assert kappa(6, 4.0) == 3.0
    assert critical_exponent(6, 4.0) == 13.0
    assert kappa(3, 2.0) == 2.0
    with pytest.raises(InvalidParameterError):
        kappa(3, 3.0)


@pytest.mark.parametrize("n", [3, 4, 6])
def test_round_sphere_schouten(n):
    rng = np.random.default_rng(n)
    f = round_sphere(n)
    for _ in range(5):
        rep = curvature_at(f, rng.uniform(-2, 2, n), 2.0)
        np.testing.assert_allclose(rep.schouten_spectrum.values, 0.5, atol=1e-12)
        np.testing.assert_allclose(rep.ricci_spectrum.values, n - 1.0, atol=1e-11)
        assert rep.scalar == pytest.approx(n * (n - 1))
        assert rep.J == pytest.approx(n / 2)


def test_cylinder_spectrum():
    rng = np.random.default_rng(0)
    f = LogForm.point_log(3, -1.0)
    for _ in range(5):
        rep = curvature_at(f, random_point(rng, 3), 2.0)
        np.testing.assert_allclose(rep.schouten_spectrum.values, (-0.5, 0.5, 0.5), atol=1e-12)


@pytest.mark.parametrize("n,k", [(6, 2), (5, 2), (7, 3)])
def test_hyperbolic_product_spectrum(n, k):
    rng = np.random.default_rng(n + k)
    f = LogForm.plane_log(n, k)
    p0 = n - 2 * k + 2
    rep = curvature_at(f, random_point(rng, n), p0)
    np.testing.assert_allclose(rep.schouten_spectrum.values, [-0.5] * k + [0.5] * (n - k), atol=1e-12)
    np.testing.assert_allclose(rep.ap_spectrum.values, [0.0] * k + [n - 2 * k] * (n - k), atol=1e-11)


def test_flat_metric_has_zero_curvature():
    rep = curvature_at(LogForm.flat(4), np.ones(4), 3.0)
    assert rep.scalar == 0.0
    np.testing.assert_allclose(rep.ap_spectrum.values, 0.0)
    d = rep.to_dict()
    assert set(d) == {"point", "ricci_spectrum", "schouten_spectrum", "ap_spectrum", "scalar", "J", "p"}


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 7), st.data())
def test_linear_factor_scalar_curvature(n, data):
    a = np.asarray(data.draw(st.lists(st.floats(-2, 2), min_size=n, max_size=n)))
    x = np.asarray(data.draw(st.lists(st.floats(-1, 1), min_size=n, max_size=n)))
    rep = curvature_at(LogForm.linear(n, a), x, 2.0)
    want = -(n - 1) * (n - 2) * float(a @ a) * math.exp(-2 * float(a @ x))
    assert rep.scalar == pytest.approx(want, rel=1e-9, abs=1e-9)


def test_singular_point_rejected():
    with pytest.raises(SingularityError):
        curvature_at(LogForm.point_log(3, -1.0), np.zeros(3), 2.0)
    with pytest.raises(SingularityError):
        PlaneDistPower(5, 2, -0.5, 3.0).u_derivatives(np.array([1.0, 0, 0, 0, 0]))


@pytest.mark.parametrize("n,p", [(3, 2.0), (4, 2.5), (6, 4.0)])
def test_fundamental_solution_is_p_harmonic(n, p):
    beta = (n - p) / (p - 1)
    rng = np.random.default_rng(1)
    for _ in range(5):
        x = random_point(rng, n)
        # u = |x|^-beta is p-harmonic away from 0.
        val = p_laplacian(_radial(n, -beta), x, p)
        assert abs(val) <= 1e-10 * np.linalg.norm(x) ** (-beta * (p - 1) - p)


def _radial(n, alpha):
    class R:
        def grad(self, x):
            r = np.linalg.norm(x)
            return alpha * r ** (alpha - 2) * x

        def hess(self, x):
            r = np.linalg.norm(x)
            return alpha * r ** (alpha - 2) * (np.eye(n) + (alpha - 2) * np.outer(x, x) / r**2)

    return R()


@pytest.mark.parametrize("alpha,p", [(1.5, 2.0), (0.7, 3.0), (-0.4, 2.5)])
def test_radial_shortcut(alpha, p):
    n = 4
    x = np.array([0.3, -0.2, 0.5, 0.1])
    r = np.linalg.norm(x)
    fp = alpha * r ** (alpha - 1)
    fpp = alpha * (alpha - 1) * r ** (alpha - 2)
    assert radial_p_laplacian(fp, fpp, r, n, p) == pytest.approx(p_laplacian(_radial(n, alpha), x, p), rel=1e-10)


@pytest.mark.parametrize("n,p", [(3, 2.0), (5, 3.0), (6, 4.0), (7, 2.5)])
def test_u_form_residual_vanishes(n, p):
    alpha = -(n - p) / (2 * (p - 1))
    rng = np.random.default_rng(7)
    for f in (RadialPower(n, alpha, p), PlaneDistPower(n, 2, alpha, p)):
        for _ in range(10):
            x = random_point(rng, n, 0.3)
            u, gu, hu = f.u_derivatives(x)
            scale = float(gu @ gu) ** ((p - 2) / 2) * (abs(np.trace(hu)) + 1.0)
            assert abs(p_laplace_residual(f, x)) <= 1e-10 * scale


@settings(max_examples=100, deadline=None)
@given(st.floats(-2.0, 2.0).filter(lambda a: abs(a) > 0.05), st.sampled_from([(4, 2.5), (5, 3.0), (6, 2.0)]))
def test_residual_is_an_identity_for_any_power(alpha, np_):
    # The relation transforms curvature under the conformal change, so it
    # holds for every positive u, not only for the model exponent.
    n, p = np_
    f = RadialPower(n, alpha, p)
    x = np.linspace(0.2, 0.6, n)
    u, gu, hu = f.u_derivatives(x)
    lap = -p_laplacian(f.u_field(), x, p)
    assert abs(p_laplace_residual(f, x)) <= 1e-9 * max(1.0, abs(lap))


def test_limit_to_n_and_infinity():
    f = LogForm.point_log(3, -6.0)
    x = np.array([0.5, 0.2, -0.3])
    rep = limit_consistency(f, x, p_to_n=[3 - 10.0**-k for k in range(2, 6)], p_to_inf=[20.0, 60.0, 250.0])
    assert rep.n_rate == pytest.approx(1.0, abs=0.1)
    errs = [r["relative_error"] for r in rep.inf_limit]
    assert errs == sorted(errs, reverse=True)
    assert errs[-1] < 0.01


def test_ray_length_flat_and_power():
    flat = conformal_ray_length(LogForm.flat(3), (np.zeros(3), np.array([1.0, 0, 0]), 0.0, 5.0))
    assert flat.length == pytest.approx(5.0, rel=1e-10) and not flat.divergent
    # Density t^(-1/2) from the singular point: length 2 sqrt(t1).
    half = conformal_ray_length(LogForm.point_log(3, -0.5), (np.zeros(3), np.array([0.0, 1.0, 0]), 0.0, 4.0))
    assert half.length == pytest.approx(4.0, rel=1e-6)
    assert half.local_exponent == pytest.approx(-0.5, abs=1e-6)


def test_ray_into_cylinder_end_diverges():
    res = conformal_ray_length(LogForm.point_log(3, -1.0), (np.zeros(3), np.array([1.0, 1.0, 0]), 0.0, 1.0))
    assert res.divergent and math.isinf(res.length)


def test_ray_crossing_singular_set_rejected():
    f = LogForm.point_log(3, -0.5)
    with pytest.raises(SingularityError):
        conformal_ray_length(f, (np.array([-1.0, 0, 0]), np.array([1.0, 0, 0]), 0.0, 2.0))


def grid_field(h, p=3.0):
    g = Grid.from_bounds((0.5,) * 4, (1.5,) * 4, h)
    return GridField.sample(g, lambda x: float(np.linalg.norm(x)) ** -0.5, p)


def test_grid_field_second_order():
    x = np.array([1.0, 1.0, 1.0, 1.0])
    exact = RadialPower(4, -0.5, 3.0)
    errs = []
    for h in (1 / 8, 1 / 16):
        gf = grid_field(h)
        xn = gf.node_point(gf.node_index(x))
        _, g_ex, h_ex = exact.u_derivatives(xn)
        _, g_num, h_num = gf.u_derivatives(xn)
        errs.append(np.abs(h_num - h_ex).max() + np.abs(g_num - g_ex).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)


def test_grid_field_boundary_layer():
    gf = grid_field(1 / 8)
    corner = gf.node_point((0, 0, 0, 0))
    assert gf.boundary_layer(corner)
    _, g_num, _ = gf.u_derivatives(corner)
    _, g_ex, _ = RadialPower(4, -0.5, 3.0).u_derivatives(corner)
    np.testing.assert_allclose(g_num, g_ex, rtol=0.05)
    with pytest.raises(SingularityError):
        gf.u_derivatives(np.full(4, 9.0))


@pytest.mark.parametrize("suffix", [".npz", ".csv"])
def test_grid_field_roundtrip(tmp_path, suffix):
    gf = grid_field(1 / 4)
    path = str(tmp_path / f"field{suffix}")
    gf.save(path)
    back = GridField.load(path)
    assert back.header() == gf.header()
    np.testing.assert_array_equal(back.values, gf.values)


def test_grid_field_rejects_nonpositive():
    g = Grid.from_bounds((0.0,) * 3, (1.0,) * 3, 0.25)
    with pytest.raises(InvalidParameterError):
        GridField(g, np.zeros(g.shape), 2.0)
