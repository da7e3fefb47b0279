import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import legendre

from sturm_spectra.errors import InvalidCoefficientError, InvalidOrderError
from sturm_spectra.reference_element import (
    differentiation_matrix,
    exact_rule,
    gauss_rule,
    gll_rule,
    interpolate_coefficient,
    lagrange_matrix,
    reference_gram,
)


def test_gll_w1_is_trapezoid():
    rule = gll_rule(1)
    np.testing.assert_array_equal(rule.nodes, [-1.0, 1.0])
    np.testing.assert_allclose(rule.weights, [1.0, 1.0], rtol=0, atol=1e-15)


def test_gll_w2_is_simpson():
    rule = gll_rule(2)
    np.testing.assert_allclose(rule.nodes, [-1.0, 0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(rule.weights, [1 / 3, 4 / 3, 1 / 3], atol=1e-15)


def test_gll_w4_frozen_nodes():
    # interior nodes are +-sqrt(3/7), weights 1/10, 49/90, 32/45
    rule = gll_rule(4)
    s = np.sqrt(3 / 7)
    np.testing.assert_allclose(rule.nodes, [-1, -s, 0, s, 1], atol=1e-15)
    np.testing.assert_allclose(rule.weights, [0.1, 49 / 90, 32 / 45, 49 / 90, 0.1], atol=1e-15)


@pytest.mark.parametrize("W", range(1, 25))
def test_gll_invariants(W):
    rule = gll_rule(W)
    assert rule.size == W + 1
    assert rule.nodes[0] == -1.0 and rule.nodes[-1] == 1.0
    assert np.all(np.diff(rule.nodes) > 0)
    assert np.all(rule.weights > 0)
    assert abs(rule.weights.sum() - 2.0) < 1e-13
    np.testing.assert_array_equal(rule.nodes, -rule.nodes[::-1])
    np.testing.assert_array_equal(rule.weights, rule.weights[::-1])
    if W >= 2:
        # interior nodes are the roots of P_W'
        c = np.zeros(W + 1)
        c[-1] = 1
        roots = np.sort(legendre.legroots(legendre.legder(c)))
        np.testing.assert_allclose(rule.nodes[1:-1], roots, atol=1e-13)


@pytest.mark.parametrize("W", [3, 6, 11, 16])
def test_gll_exact_to_degree_2w_minus_1(W):
    rule = gll_rule(W)
    for d in range(2 * W):
        exact = 0.0 if d % 2 else 2.0 / (d + 1)
        assert abs(rule.integrate(rule.nodes**d) - exact) < 1e-13
    # and not exact for degree 2W
    assert abs(rule.integrate(rule.nodes ** (2 * W)) - 2 / (2 * W + 1)) > 1e-12


def test_invalid_orders():
    for bad in (0, -1, 2.5):
        with pytest.raises(InvalidOrderError):
            gll_rule(bad)
    with pytest.raises(InvalidOrderError):
        gauss_rule(0)


def test_exact_rule_degree():
    for degree in range(0, 30):
        rule = exact_rule(degree)
        x = rule.nodes
        exact = 0.0 if degree % 2 else 2.0 / (degree + 1)
        assert abs(rule.integrate(x**degree) - exact) < 1e-13


@pytest.mark.parametrize("W", [3, 8, 14])
def test_differentiation_exact_on_polynomials(W):
    rule = gll_rule(W)
    D = differentiation_matrix(rule)
    x = rule.nodes
    np.testing.assert_allclose(D @ np.ones(W + 1), 0, atol=1e-12)
    for d in range(1, W + 1):
        np.testing.assert_allclose(D @ x**d, d * x ** (d - 1), atol=1e-10 * W**2)


def test_lagrange_matrix_cardinal():
    rule = gll_rule(7)
    V = lagrange_matrix(rule.nodes, rule.nodes)
    np.testing.assert_array_equal(V, np.eye(8))
    pts = np.linspace(-1, 1, 33)
    np.testing.assert_allclose(lagrange_matrix(rule.nodes, pts).sum(axis=1), 1, atol=1e-13)


def test_interpolate_reproduces_polynomials():
    f = lambda x: 3 * x**3 - x + 2
    p = interpolate_coefficient(f, 3)
    xs = np.linspace(-1, 1, 11)
    np.testing.assert_allclose(p(xs), f(xs), atol=1e-13)
    np.testing.assert_allclose(p.derivative()(xs), 9 * xs**2 - 1, atol=1e-12)


def test_interpolate_degree_zero_uses_midpoint():
    p = interpolate_coefficient(lambda x: x + 5, 0)
    assert p(0.7) == 5.0
    assert p.derivative()(0.3) == 0.0


def test_interpolate_rejects_nonfinite():
    with pytest.raises(InvalidCoefficientError):
        interpolate_coefficient(lambda x: 1 / x, 2)


def test_interpolate_scalar_only_callable():
    import math

    p = interpolate_coefficient(lambda t: math.exp(t), 12)
    assert abs(p(0.25) - math.exp(0.25)) < 1e-12


@pytest.mark.parametrize("W", [3, 6, 10])
def test_reference_gram(W):
    G = reference_gram(W)
    rule = gll_rule(W)
    ones = np.ones(W + 1)
    x = rule.nodes
    assert abs(ones @ G.l2 @ ones - 2.0) < 1e-13
    assert abs(x @ G.h1 @ x - 2.0) < 1e-12
    assert abs((x**2) @ G.h2 @ (x**2) - 8.0) < 1e-10
    assert np.all(np.linalg.eigvalsh(G.full) > 0)
    np.testing.assert_array_equal(G.full, G.full.T)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=30))
def test_gll_weight_sum_property(W):
    assert abs(gll_rule(W).weights.sum() - 2.0) < 1e-12
