from fractions import Fraction
from math import factorial

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oseen_ale.quadrature import time_rule, triangle_rule


def exact_monomial(a, b):
    return float(Fraction(factorial(a) * factorial(b), factorial(a + b + 2)))


@pytest.mark.parametrize("order", [1, 2, 4, 5, 6, 8])
def test_triangle_rule_integrates_monomials(order):
    rule = triangle_rule(order)
    x, y = rule.xi[:, 0], rule.xi[:, 1]
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(0.5, abs=1e-15)
    for a in range(order + 1):
        for b in range(order + 1 - a):
            got = float(rule.weights @ (x ** a * y ** b))
            assert got == pytest.approx(exact_monomial(a, b), rel=1e-13, abs=1e-15)


def test_barycentric_points_sum_to_one():
    rule = triangle_rule(4)
    np.testing.assert_allclose(rule.points.sum(axis=1), 1.0, atol=1e-15)


@given(st.integers(0, 9))
def test_gauss5_time_rule_exact_to_degree_9(k):
    rule = time_rule("gauss5")
    assert float(rule.weights @ rule.nodes ** k) == pytest.approx(1.0 / (k + 1), rel=1e-13)


def test_midpoint_exact_for_linear_only():
    rule = time_rule("midpoint")
    assert float(rule.weights @ rule.nodes) == pytest.approx(0.5)
    assert float(rule.weights @ rule.nodes ** 2) != pytest.approx(1 / 3)


def test_endpoint_rules():
    assert list(time_rule("left").nodes) == [0.0]
    assert list(time_rule("right").nodes) == [1.0]
    assert list(time_rule("endpoint").nodes) == [1.0]
    with pytest.raises(ValueError):
        time_rule("simpson-ish")
