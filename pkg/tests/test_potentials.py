"""Tests for off-surface layer potentials."""

import numpy as np
import pytest

from jumpbem.exceptions import EXIT_NUMERICAL, GuardDistanceError, SpaceMismatchError
from jumpbem.potentials import (
    Side,
    classify_sides,
    distance_to_mesh,
    eval_double_layer,
    eval_single_layer,
    eval_solution,
    make_evaluation_set,
    point_triangle_distance,
)
from jumpbem.quadrature import analytic_single_layer_panel
from jumpbem.spaces import CoefficientVector, SpaceTag

TRIANGLE = np.array([[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]])


class TestDistances:
    """Test point-triangle distances."""

    @pytest.mark.parametrize(
        "point, expected",
        [
            ([0.2, 0.2, 1.0], 1.0),
            ([-1.0, -1.0, 0.0], np.sqrt(2.0)),
            ([2.0, 0.0, 0.0], 1.0),
            ([0.5, -1.0, 0.0], 1.0),
            ([1.0, 1.0, 0.0], np.sqrt(0.5)),
            ([-0.5, 0.5, 0.0], 0.5),
            ([0.25, 0.25, 0.0], 0.0),
        ],
    )
    def test_voronoi_regions(self, point, expected):
        assert point_triangle_distance([point], TRIANGLE)[0, 0] == pytest.approx(expected, abs=1e-14)

    def test_distance_to_sphere(self, sphere2):
        distances = distance_to_mesh(sphere2, [[0.0, 0.0, 0.0], 3.0 * sphere2.vertices[0]])
        assert distances[0] == pytest.approx(1.0, rel=3e-2)
        assert distances[1] == pytest.approx(2.0, rel=1e-12)


class TestEvaluationSet:
    """Test side classification and the guard distance."""

    def test_classify_sides(self, sphere2):
        points = [[0.0, 0.0, 0.0], [0.3, 0.2, 0.1], [2.0, 0.0, 0.0], [0.0, -1.5, 0.7]]
        np.testing.assert_array_equal(classify_sides(sphere2, points), [True, True, False, False])

    def test_points_along_vertex_direction(self, sphere1):
        vertex = sphere1.vertices[0]
        assert classify_sides(sphere1, [0.1 * vertex, 3.0 * vertex]).tolist() == [True, False]

    def test_sides(self, sphere2):
        pts = make_evaluation_set(sphere2, [[0.0, 0.0, 0.5], [0.0, 0.0, 2.0]])
        assert pts.sides == [Side.INTERIOR, Side.EXTERIOR]
        assert len(pts.subset(pts.interior)) == 1

    def test_guard_distance(self, sphere2):
        with pytest.raises(GuardDistanceError) as info:
            make_evaluation_set(sphere2, [[0.0, 0.0, 0.5], sphere2.vertices[3]])
        assert info.value.exit_code == EXIT_NUMERICAL
        assert info.value.distance == pytest.approx(0.0, abs=1e-12)


class TestLayerPotentials:
    """Test U and V against closed-form values."""

    def setup_method(self):
        self.points = [[0.1, -0.2, 0.4], [0.0, 0.0, 0.0], [0.0, 2.0, 0.0], [1.5, 1.5, -1.0]]

    def test_single_layer_of_one(self, sphere3):
        pts = make_evaluation_set(sphere3, self.points)
        sigma = CoefficientVector.constant(sphere3.n_vertices, 1.0, SpaceTag.FLUX)
        values = eval_single_layer(sphere3, sigma, pts)
        expected = sum(analytic_single_layer_panel(pts.points, corners) for corners in sphere3.panel_vertices)
        np.testing.assert_allclose(values, expected, rtol=1e-5)
        # Close to the sphere values 1 inside and 1/|x| outside.
        assert values[1] == pytest.approx(1.0, rel=2e-2)
        assert values[2] == pytest.approx(0.5, rel=2e-2)

    def test_double_layer_of_one(self, sphere3):
        pts = make_evaluation_set(sphere3, self.points)
        q = CoefficientVector.constant(sphere3.n_vertices, 1.0, SpaceTag.TRACE)
        values = eval_double_layer(sphere3, q, pts)
        np.testing.assert_allclose(values, np.where(pts.interior, 1.0, 0.0), atol=2e-4)

    def test_double_layer_is_axisymmetric(self, sphere3):
        """q = z is unchanged by the half turn about z, which maps the icosphere to itself."""
        points = np.array([[0.3, 0.1, 0.4], [1.2, 0.7, 0.5], [0.0, 0.4, -0.3]])
        turned = points * np.array([-1.0, -1.0, 1.0])
        pts = make_evaluation_set(sphere3, np.vstack([points, turned]))
        q = CoefficientVector(sphere3.vertices[:, 2], SpaceTag.TRACE)
        values = eval_double_layer(sphere3, q, pts)
        np.testing.assert_allclose(values[:3], values[3:], rtol=1e-10, atol=1e-13)

    def test_double_layer_decays_as_dipole(self, sphere3):
        """Outside, V z = -z / (3 |x|^3), so the value quarters when the distance doubles."""
        pts = make_evaluation_set(sphere3, [[0.0, 0.0, 10.0], [0.0, 0.0, 20.0]])
        q = CoefficientVector(sphere3.vertices[:, 2], SpaceTag.TRACE)
        near, far = eval_double_layer(sphere3, q, pts)
        assert 3.5 <= near / far <= 4.5
        assert near * 100.0 == pytest.approx(-1.0 / 3.0, rel=5e-2)

    def test_hypersingular_sign_matches_normal_derivative(self, sphere3, operators3):
        """D~ is the outward normal derivative of V; inside, V z = 2z/3."""
        pts = make_evaluation_set(sphere3, [[0.0, 0.0, 0.2], [0.0, 0.0, 0.4]])
        z = sphere3.vertices[:, 2]
        lower, upper = eval_double_layer(sphere3, CoefficientVector(z, SpaceTag.TRACE), pts)
        slope = (upper - lower) / 0.2
        quotient = z @ operators3.hypersingular.matrix @ z / (z @ operators3.mass.dense @ z)
        assert quotient > 0.0
        assert slope > 0.0
        assert slope == pytest.approx(2.0 / 3.0, rel=5e-2)
        assert quotient == pytest.approx(2.0 / 3.0, rel=8e-2)

    def test_solution_is_sum(self, sphere2):
        pts = make_evaluation_set(sphere2, self.points)
        rng = np.random.default_rng(3)
        sigma = CoefficientVector(rng.normal(size=sphere2.n_vertices), SpaceTag.FLUX)
        q = CoefficientVector(rng.normal(size=sphere2.n_vertices), SpaceTag.TRACE)
        np.testing.assert_allclose(
            eval_solution(sphere2, sigma, q, pts),
            eval_single_layer(sphere2, sigma, pts) + eval_double_layer(sphere2, q, pts),
        )

    def test_threads_do_not_change_results(self, sphere2):
        points = np.random.default_rng(5).normal(size=(80, 3)) * 3.0
        pts = make_evaluation_set(sphere2, points[np.abs(np.linalg.norm(points, axis=1) - 1.0) > 0.2])
        sigma = CoefficientVector(np.linspace(0.0, 1.0, sphere2.n_vertices), SpaceTag.FLUX)
        np.testing.assert_array_equal(
            eval_single_layer(sphere2, sigma, pts, threads=3), eval_single_layer(sphere2, sigma, pts)
        )

    def test_wrong_density_space(self, sphere1):
        pts = make_evaluation_set(sphere1, self.points)
        trace = CoefficientVector.constant(sphere1.n_vertices, 1.0, SpaceTag.TRACE)
        flux = CoefficientVector.constant(sphere1.n_vertices, 1.0, SpaceTag.FLUX)
        with pytest.raises(SpaceMismatchError):
            eval_single_layer(sphere1, trace, pts)
        with pytest.raises(SpaceMismatchError):
            eval_double_layer(sphere1, flux, pts)

    def test_wrong_density_length(self, sphere1):
        pts = make_evaluation_set(sphere1, self.points)
        with pytest.raises(SpaceMismatchError):
            eval_single_layer(sphere1, CoefficientVector.constant(5, 1.0, SpaceTag.FLUX), pts)
