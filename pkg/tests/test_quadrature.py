import math

import numpy as np
import pytest

from nnlif.quadrature import gauss_laguerre, gauss_legendre, map_affine


def test_legendre_one_point_is_midpoint_rule():
    rule = gauss_legendre(1)
    assert rule.nodes == pytest.approx([0.0])
    assert rule.weights == pytest.approx([2.0])


def test_legendre_two_point_classical_nodes():
    rule = gauss_legendre(2)
    assert rule.nodes == pytest.approx([-1 / math.sqrt(3), 1 / math.sqrt(3)])
    assert rule.weights == pytest.approx([1.0, 1.0])


def test_legendre_16_odd_and_even_monomials():
    rule = gauss_legendre(16)
    assert abs(rule.integrate(lambda x: x**31)) < 1e-13
    assert rule.integrate(lambda x: x**30) == pytest.approx(2.0 / 31.0, abs=1e-13)


def test_laguerre_one_point():
    rule = gauss_laguerre(1)
    assert rule.nodes == pytest.approx([1.0])
    assert rule.weights == pytest.approx([1.0])


def test_laguerre_two_point_cubic_moment():
    rule = gauss_laguerre(2)
    assert rule.integrate(lambda x: x**3) == pytest.approx(6.0, rel=1e-13)


def test_laguerre_40_factorial_moment():
    rule = gauss_laguerre(40)
    assert rule.integrate(lambda x: x**20) == pytest.approx(math.factorial(20), rel=1e-12)


@pytest.mark.parametrize("n_q", range(1, 33))
def test_exactness_up_to_degree_2n_minus_1(n_q):
    leg = gauss_legendre(n_q)
    lag = gauss_laguerre(n_q)
    for d in range(2 * n_q):
        exact_leg = 2.0 / (d + 1) if d % 2 == 0 else 0.0
        got_leg = leg.integrate(lambda x: x**d)
        assert abs(got_leg - exact_leg) <= 1e-12 * max(1.0, abs(exact_leg))
        exact_lag = math.factorial(d)
        got_lag = lag.integrate(lambda x: x**d)
        assert abs(got_lag - exact_lag) <= 1e-12 * exact_lag


@pytest.mark.parametrize("n_q", [1, 2, 3, 5, 8, 13, 21, 32, 64])
def test_nodes_increasing_weights_positive(n_q):
    for rule, total in ((gauss_legendre(n_q), 2.0), (gauss_laguerre(n_q), 1.0)):
        assert np.all(np.diff(rule.nodes) > 0)
        assert np.all(rule.weights > 0)
        assert rule.weights.sum() == pytest.approx(total, rel=1e-12)


def test_large_orders_converge():
    for n_q in (128, 256):
        rule = gauss_laguerre(n_q)
        assert np.all(np.diff(rule.nodes) > 0)
        assert gauss_legendre(n_q).weights.sum() == pytest.approx(2.0, rel=1e-12)


def test_map_affine_one_point():
    rule = map_affine(gauss_legendre(1), 1.0, 2.0)
    assert rule.nodes == pytest.approx([1.5])
    assert rule.weights == pytest.approx([1.0])


def test_map_affine_two_point():
    rule = map_affine(gauss_legendre(2), 0.0, 2.0)
    assert rule.weights == pytest.approx([1.0, 1.0])
    assert rule.nodes == pytest.approx([1 - 1 / math.sqrt(3), 1 + 1 / math.sqrt(3)])


def test_map_affine_integrates_quadratic_exactly():
    rule = map_affine(gauss_legendre(2), 1.0, 2.0)
    assert rule.integrate(lambda v: v**2) == pytest.approx(7.0 / 3.0, rel=1e-14)


def test_map_affine_rejects_bad_interval():
    with pytest.raises(ValueError, match="invalid interval"):
        map_affine(gauss_legendre(2), 2.0, 2.0)
    with pytest.raises(ValueError, match="invalid interval"):
        map_affine(gauss_legendre(2), 3.0, 2.0)


def test_map_affine_rejects_laguerre_rule():
    with pytest.raises(ValueError, match="finite-legendre"):
        map_affine(gauss_laguerre(2), 0.0, 1.0)


def test_order_below_one_rejected():
    with pytest.raises(ValueError):
        gauss_legendre(0)
    with pytest.raises(ValueError):
        gauss_laguerre(0)
