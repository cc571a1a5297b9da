import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hodograph.exact_solutions import (ORACLES, ArcsineSolution, PolynomialSolution, ProductSolution,
                                       epd_residual)


def test_arcsine_pde_residual(arcsine, rng):
    s, t = rng.uniform(0.05, 3, 100), rng.uniform(0.05, 3, 100)
    assert np.max(np.abs(arcsine.pde_residual(arcsine.profile, s, t))) <= 1e-12


def test_arcsine_closed_derivatives(arcsine, rng):
    s, t = rng.uniform(0.1, 2, 20), rng.uniform(0.1, 2, 20)
    np.testing.assert_allclose(arcsine.x_s(s, t), arcsine.x_s_closed(s, t), atol=1e-13)
    np.testing.assert_allclose(arcsine.x_t(s, t), arcsine.x_t_closed(s, t), atol=1e-13)


def test_arcsine_goursat_values(arcsine):
    s = np.linspace(1.0, 3.0, 7)
    assert np.all(arcsine.g(s) == -math.pi / 2)
    assert np.all(arcsine.h(s) == math.pi / 2)
    np.testing.assert_allclose(arcsine.x(s, 0.0), -math.pi / 2)


def test_arcsine_n_matches_normal_derivative(arcsine):
    s = np.linspace(0.05, 0.95, 19)
    # outward normal derivative along (1, 1)
    dn = arcsine.x_s(s, 1 - s) + arcsine.x_t(s, 1 - s)
    np.testing.assert_allclose(arcsine.n(s), dn, atol=1e-12)
    e = 1e-6
    np.testing.assert_allclose((arcsine.N(s + e) - arcsine.N(s - e)) / (2 * e), arcsine.n(s), atol=1e-7)


@pytest.mark.parametrize("name", ["arcsine", "polynomial"])
def test_derivatives_match_finite_differences(name):
    o = ORACLES[name]()
    s, t, e = 0.8, 0.55, 1e-5
    assert o.x_s(s, t) == pytest.approx((o.x(s + e, t) - o.x(s - e, t)) / (2 * e), abs=1e-8)
    assert o.x_t(s, t) == pytest.approx((o.x(s, t + e) - o.x(s, t - e)) / (2 * e), abs=1e-8)
    e = 1e-4
    fd = (o.x(s + e, t + e) - o.x(s + e, t - e) - o.x(s - e, t + e) + o.x(s - e, t - e)) / (4 * e * e)
    assert o.x_st(s, t) == pytest.approx(fd, abs=1e-5)


def test_polynomial_reference_values(poly):
    assert float(poly.x_up(1.0, 1.0)) == pytest.approx(-math.pi / 2, abs=4e-16)
    assert float(poly.dx_dp(1.5, 0.0)) == pytest.approx(145 * math.pi / 416, abs=4e-16)
    assert float(poly.x(1.0, 0.0)) == pytest.approx(-math.pi / 2, abs=1e-14)
    assert float(poly.x(0.0, 1.0)) == pytest.approx(math.pi / 2, abs=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_polynomial_epd_in_diamond(a, b):
    s, t = max(a, 1 - b), max(b, 1 - a)
    assert epd_residual(PolynomialSolution(), s + t, s - t) <= 1e-12


def test_polynomial_data_consistent(poly):
    d = poly.data()
    s = np.linspace(0, 1, 11)
    np.testing.assert_allclose(d.f(s), poly.x(s, 1 - s), atol=1e-13)
    dn = poly.x_s(s, 1 - s) + poly.x_t(s, 1 - s)
    np.testing.assert_allclose(d.n(s), dn, atol=1e-12)
    assert bool(poly.in_diamond(0.75, 0.75)) and not bool(poly.in_diamond(1.2, 0.5))


def test_product_solution(rng):
    P = ProductSolution(1.5)
    x, y = rng.uniform(-1.5, 1.5, 100), rng.uniform(-1, 1, 100)
    assert np.max(np.abs(P.ma_residual(x, y))) <= 1e-12
    np.testing.assert_allclose(P.y_of_u(P.u(y)), y, atol=1e-14)
    s, t = P.hodograph_point(x, y)
    np.testing.assert_allclose(s + t, P.u(y))
    # x_a at the hodograph image recovers the physical x (for A = 1 the scaling drops out)
    np.testing.assert_allclose(ArcsineSolution(1.0).x(s, t), x, atol=1e-12)


def test_epd_residual_empty_probe_set(arcsine):
    assert epd_residual(arcsine, np.array([]), np.array([])) == 0.0
