"""Tests for triangle rules, panel-pair rules and the closed-form panel integral."""

from math import factorial

import numpy as np
import pytest
from scipy import integrate

from jumpbem.exceptions import QuadratureError
from jumpbem.quadrature import (
    FOUR_PI,
    PanelConfiguration,
    analytic_single_layer_panel,
    gauss_rule,
    singular_pair_rule,
)

T1 = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.3, 0.8, 0.0]])
EDGE_NEIGHBOUR = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.4, -0.2, 0.7]])
VERTEX_NEIGHBOUR = np.array([[0.0, 0.0, 0.0], [-0.6, 0.3, 0.4], [-0.2, -0.9, 0.1]])


def area(corners):
    return 0.5 * np.linalg.norm(np.cross(corners[1] - corners[0], corners[2] - corners[0]))


def integrate_over_triangle(f, corners):
    """Adaptive integral of a scalar function over a flat triangle."""
    a, b, c = corners

    def integrand(v, u):
        return f(a + u * (b - a) + v * (c - a))

    value, _ = integrate.dblquad(integrand, 0.0, 1.0, 0.0, lambda u: 1.0 - u, epsabs=1e-13, epsrel=1e-12)
    return 2.0 * area(corners) * value


def pair_integral(rule, x_corners, y_corners):
    x = rule.points_x @ x_corners
    y = rule.points_y @ y_corners
    kernel = 1.0 / (FOUR_PI * np.linalg.norm(x - y, axis=1))
    return area(x_corners) * area(y_corners) * float(rule.weights @ kernel)


class TestTriangleRules:
    """Test the regular triangle rules."""

    @pytest.mark.parametrize("degree", list(range(1, 21)))
    def test_monomials_exact(self, degree):
        rule = gauss_rule(degree)
        x, y = rule.points[:, 1], rule.points[:, 2]
        for a in range(degree + 1):
            for b in range(degree + 1 - a):
                exact = 2.0 * factorial(a) * factorial(b) / factorial(a + b + 2)
                assert rule.weights @ (x**a * y**b) == pytest.approx(exact, rel=1e-12, abs=1e-15)

    @pytest.mark.parametrize("degree", [1, 2, 4, 6, 9, 20])
    def test_weights_positive_and_normalized(self, degree):
        rule = gauss_rule(degree)
        assert np.all(rule.weights > 0.0)
        assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
        np.testing.assert_allclose(rule.points.sum(axis=1), 1.0, atol=1e-14)
        assert np.all(rule.points >= 0.0)

    @pytest.mark.parametrize("degree", list(range(1, 21)))
    def test_reported_degree_covers_request(self, degree):
        assert gauss_rule(degree).degree >= degree

    def test_degree_three_uses_degree_four_rule(self):
        rule = gauss_rule(3)
        assert rule.degree == 4
        assert len(rule) == len(gauss_rule(4))

    @pytest.mark.parametrize("degree", [0, 21])
    def test_unsupported_degree(self, degree):
        with pytest.raises(QuadratureError):
            gauss_rule(degree)

    def test_map_to_physical(self):
        rule = gauss_rule(2)
        mapped = rule.map(T1)
        assert mapped.shape == (len(rule), 3)
        np.testing.assert_allclose(rule.weights @ mapped, T1.mean(axis=0))


class TestPanelConfiguration:
    """Test panel configurations."""

    def test_from_shared_count(self):
        assert PanelConfiguration.from_shared_count(3) is PanelConfiguration.IDENTICAL
        assert PanelConfiguration.from_shared_count(2) is PanelConfiguration.SHARED_EDGE
        assert PanelConfiguration.from_shared_count(1) is PanelConfiguration.SHARED_VERTEX
        assert PanelConfiguration.from_shared_count(0) is PanelConfiguration.DISJOINT

    def test_invalid_shared_count(self):
        with pytest.raises(QuadratureError):
            PanelConfiguration.from_shared_count(4)


class TestSingularPairRules:
    """Test the regularized panel-pair rules."""

    @pytest.mark.parametrize("configuration", list(PanelConfiguration))
    def test_weights_positive_and_normalized(self, configuration):
        rule = singular_pair_rule(configuration, 5)
        assert np.all(rule.weights > 0.0)
        assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("configuration", list(PanelConfiguration))
    def test_polynomials_match_tensor_rule(self, configuration):
        """All rules integrate the same reference pair, so smooth integrands agree."""
        rule = singular_pair_rule(configuration, 6)
        reference = singular_pair_rule(PanelConfiguration.DISJOINT, 20)

        def f(x, y):
            return x[:, 1] ** 2 * y[:, 2] + 3.0 * x[:, 2] * y[:, 1] * y[:, 2] + x[:, 1] * y[:, 1] ** 3

        value = rule.weights @ f(rule.points_x, rule.points_y)
        expected = reference.weights @ f(reference.points_x, reference.points_y)
        assert value == pytest.approx(expected, rel=1e-12)

    def test_disjoint_is_tensor_product(self):
        rule = singular_pair_rule(PanelConfiguration.DISJOINT, 4)
        base = gauss_rule(4)
        assert len(rule) == len(base) ** 2
        np.testing.assert_allclose(rule.weights, np.outer(base.weights, base.weights).ravel())

    def test_invalid_order(self):
        with pytest.raises(QuadratureError):
            singular_pair_rule(PanelConfiguration.IDENTICAL, 0)

    @pytest.mark.parametrize(
        "configuration, y_corners",
        [
            (PanelConfiguration.IDENTICAL, T1),
            (PanelConfiguration.SHARED_EDGE, EDGE_NEIGHBOUR),
            (PanelConfiguration.SHARED_VERTEX, VERTEX_NEIGHBOUR),
        ],
    )
    def test_converges_to_adaptive_oracle(self, configuration, y_corners):
        oracle = integrate_over_triangle(lambda x: float(analytic_single_layer_panel(x, y_corners)), T1)
        errors = [
            abs(pair_integral(singular_pair_rule(configuration, order), T1, y_corners) - oracle) / oracle
            for order in (4, 6, 8)
        ]
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 1e-6


class TestAnalyticPanelIntegral:
    """Test the closed-form single-layer panel integral."""

    def test_far_point_matches_quadrature(self):
        point = np.array([2.0, 1.5, 3.0])
        rule = gauss_rule(20)
        y = rule.map(T1)
        expected = area(T1) * rule.weights @ (1.0 / (FOUR_PI * np.linalg.norm(y - point, axis=1)))
        assert float(analytic_single_layer_panel(point, T1)) == pytest.approx(expected, rel=1e-12)

    def test_near_point_matches_adaptive_quadrature(self):
        point = T1.mean(axis=0) + np.array([0.05, -0.02, 0.03])
        expected = integrate_over_triangle(lambda y: 1.0 / (FOUR_PI * np.linalg.norm(y - point)), T1)
        assert float(analytic_single_layer_panel(point, T1)) == pytest.approx(expected, rel=1e-8)

    def test_point_on_edge_is_finite(self):
        value = analytic_single_layer_panel(0.5 * (T1[0] + T1[1]), T1)
        assert np.isfinite(value) and value > 0.0

    def test_vectorized_shape(self):
        points = np.random.default_rng(0).normal(size=(2, 4, 3)) + 3.0
        values = analytic_single_layer_panel(points, T1)
        assert values.shape == (2, 4)
        assert values[1, 2] == pytest.approx(float(analytic_single_layer_panel(points[1, 2], T1)))

    def test_degenerate_triangle(self):
        flat = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        with pytest.raises(QuadratureError):
            analytic_single_layer_panel(np.ones(3), flat)
