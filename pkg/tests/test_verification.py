"""Tests for manufactured solutions, error norms and the sphere oracles."""

import numpy as np
import pandas as pd
import pytest

from jumpbem.exceptions import ConfigurationError
from jumpbem.mesh import make_cube
from jumpbem.potentials import eval_solution, make_evaluation_set
from jumpbem.solver import solve_monolithic, solve_sequential
from jumpbem.spaces import project_mean_zero
from jumpbem.verification import (
    CSV_COLUMNS,
    ManufacturedCase,
    OperatorTag,
    PointSource,
    case_from_sources,
    check_clearance,
    convergence_study,
    default_case,
    error_norms,
    exact_densities,
    fibonacci_directions,
    field_errors,
    make_manufactured,
    sample_sets,
    solid_harmonic,
    solution_error_norms,
    sphere_harmonic_oracle,
)


class TestManufacturedCase:
    """Test exact field pairs and their jumps."""

    def setup_method(self):
        self.case = default_case()
        self.x = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])

    def test_jumps(self):
        inner, outer = self.case.interior_field(self.x), self.case.exterior_field(self.x)
        np.testing.assert_allclose(self.case.value_jump(self.x), inner - outer)
        np.testing.assert_allclose(self.case.value_jump(self.x, 2.0), inner - 2.0 * outer)

    def test_flux_jump_matches_finite_differences(self):
        normals = self.x.copy()
        step = 1e-6
        inner = (self.case.interior_field(self.x + step * normals) - self.case.interior_field(self.x - step * normals)) / (
            2.0 * step
        )
        outer = (self.case.exterior_field(self.x + step * normals) - self.case.exterior_field(self.x - step * normals)) / (
            2.0 * step
        )
        np.testing.assert_allclose(self.case.flux_jump(self.x, normals, 3.0), inner - 3.0 * outer, rtol=1e-7)

    def test_point_source_potential(self):
        source = PointSource((0.0, 0.0, 0.0), 4.0 * np.pi)
        assert source.potential(np.array([0.0, 2.0, 0.0])) == pytest.approx(0.5)

    def test_case_from_sources(self):
        case = case_from_sources(
            [
                {"location": [0.0, 0.0, 3.0], "strength": 2.0, "field": "interior"},
                {"location": [0.1, 0.0, 0.0]},
                {"location": [0.0, 0.1, 0.0], "field": "exterior"},
            ],
            eps0=0.5,
            eps1=3.0,
        )
        assert len(case.interior_sources) == 2
        assert len(case.exterior_sources) == 1
        assert case.interior_sources[0].strength == 2.0
        assert (case.eps0, case.eps1) == (0.5, 3.0)

    def test_unknown_field_kind(self):
        with pytest.raises(ConfigurationError):
            case_from_sources([{"location": [0.0, 0.0, 3.0], "field": "both"}], 2.0, 2.0)


class TestClearance:
    """Sources must sit on the correct side of the surface."""

    def test_default_case_fits(self, sphere2):
        check_clearance(sphere2, default_case())

    def test_interior_source_inside_rejected(self, sphere2):
        case = ManufacturedCase(interior_sources=(PointSource((0.0, 0.0, 0.2)),))
        with pytest.raises(ConfigurationError, match="outside"):
            check_clearance(sphere2, case)

    def test_source_too_close_rejected(self, sphere2):
        case = ManufacturedCase(exterior_sources=(PointSource((0.0, 0.0, 0.97)),))
        with pytest.raises(ConfigurationError, match="clearance"):
            check_clearance(sphere2, case)


class TestManufacturedProblem:
    """Test jump data built from a manufactured case."""

    def test_plain_trace_jump_has_zero_mean(self, sphere2):
        problem = make_manufactured(sphere2, default_case(1.0, 1.0))
        assert problem.data.g0.total() == pytest.approx(0.0, abs=1e-12)
        assert problem.case.interior_constant != 0.0

    def test_without_shift(self, sphere2):
        problem = make_manufactured(sphere2, default_case(1.0, 1.0), mean_zero_jump=False)
        assert problem.case.interior_constant == 0.0
        assert abs(problem.data.g0.total()) > 1e-6

    def test_unit_weights_reduce_to_projections(self, sphere2, operators2):
        problem = make_manufactured(sphere2, default_case(1.0, 1.0))
        solution = solve_sequential(operators2, problem.data)
        mass = operators2.mass
        np.testing.assert_allclose(solution.sigma.values, mass.solve(problem.data.g1).values, atol=1e-10)
        expected_q, _ = project_mean_zero(mass.solve(problem.data.g0), mass)
        np.testing.assert_allclose(solution.q.values, expected_q.values, atol=1e-10)

    def test_exact_densities_reproduce_fields(self, sphere3, operators3):
        """Representation error alone, with no solve involved."""
        case = make_manufactured(sphere3, default_case(1.0, 1.0)).case
        sigma, q = exact_densities(sphere3, case, operators3)
        samples = sample_sets(sphere3, 32, 32)
        errors = error_norms(sphere3, sigma, q, case, samples)
        assert errors.exterior_rel_l2 < 2e-2
        assert errors.interior_rel_l2_mod_const < 2e-2


class TestErrorNorms:
    """Test error norms against exact fields."""

    def setup_method(self):
        rng = np.random.default_rng(4)
        self.inside = rng.normal(size=20)
        self.outside = rng.normal(size=30)

    def test_exact_is_zero_error(self):
        errors = field_errors(self.inside, self.inside, self.outside, self.outside)
        assert errors.exterior_rel_l2 <= 1e-13
        assert errors.interior_rel_l2_mod_const <= 1e-13
        assert errors.fitted_constant == pytest.approx(0.0, abs=1e-13)

    def test_interior_constant_is_fitted(self):
        errors = field_errors(self.inside + 5.0, self.inside, self.outside, self.outside)
        assert errors.fitted_constant == pytest.approx(5.0)
        assert errors.interior_rel_l2_mod_const <= 1e-13

    def test_exterior_constant_is_an_error(self):
        errors = field_errors(self.inside, self.inside, self.outside + 1.0, self.outside)
        assert errors.exterior_rel_l2 > 0.1

    def test_empty_samples(self):
        with pytest.raises(ConfigurationError):
            field_errors(np.zeros(0), np.zeros(0), self.outside, self.outside)

    def test_dict_keys(self):
        errors = field_errors(self.inside, self.inside, self.outside, self.outside)
        assert set(errors.dict()) == {"exterior_rel_l2", "interior_rel_l2_mod_const", "fitted_constant"}

    def test_constant_interior_field(self, sphere2, operators2):
        """A constant interior field with no exterior field is recovered exactly."""
        case = ManufacturedCase(eps0=2.0, eps1=2.0, interior_constant=3.0)
        problem = make_manufactured(sphere2, case, mean_zero_jump=False)
        solution = solve_sequential(operators2, problem.data)
        errors = solution_error_norms(sphere2, solution, problem.case, sample_sets(sphere2, 16, 16))
        assert errors.exterior_rel_l2 <= 1e-12
        assert errors.interior_rel_l2_mod_const <= 1e-12
        assert errors.fitted_constant == pytest.approx(-3.0)


class TestManufacturedSolve:
    """End-to-end solves against the manufactured fields."""

    @pytest.mark.parametrize("eps0, eps1", [(2.0, 2.0), (0.5, 3.0)])
    def test_errors_decrease(self, eps0, eps1, sphere2, operators2, sphere3, operators3):
        errors = []
        for mesh, operators in ((sphere2, operators2), (sphere3, operators3)):
            problem = make_manufactured(mesh, default_case(eps0, eps1))
            solution = solve_sequential(operators, problem.data)
            errors.append(solution_error_norms(mesh, solution, problem.case, sample_sets(mesh)))
        assert errors[1].exterior_rel_l2 < errors[0].exterior_rel_l2
        assert errors[1].interior_rel_l2_mod_const < errors[0].interior_rel_l2_mod_const
        assert errors[1].exterior_rel_l2 < 2e-2
        assert errors[1].interior_rel_l2_mod_const < 2e-2

    def test_methods_give_same_errors(self, sphere2, operators2):
        problem = make_manufactured(sphere2, default_case())
        samples = sample_sets(sphere2, 32, 32)
        sequential = solution_error_norms(sphere2, solve_sequential(operators2, problem.data), problem.case, samples)
        monolithic = solution_error_norms(sphere2, solve_monolithic(operators2, problem.data), problem.case, samples)
        assert sequential.exterior_rel_l2 == pytest.approx(monolithic.exterior_rel_l2, rel=1e-7)
        assert sequential.interior_rel_l2_mod_const == pytest.approx(monolithic.interior_rel_l2_mod_const, rel=1e-7)

    def test_solution_is_harmonic(self, sphere2, operators2):
        solution = solve_sequential(operators2, make_manufactured(sphere2, default_case()).data)
        step = 1e-4
        center = np.zeros(3)
        stencil = np.vstack([center, center + step * np.eye(3), center - step * np.eye(3)])
        values = eval_solution(sphere2, solution.sigma, solution.q, make_evaluation_set(sphere2, stencil))
        laplacian = (values[1:].sum() - 6.0 * values[0]) / step**2
        assert abs(laplacian) <= 1e-4 * np.abs(values).max()

    def test_zero_data_gives_zero_solution(self, sphere1, operators1):
        problem = make_manufactured(sphere1, ManufacturedCase())
        solution = solve_sequential(operators1, problem.data)
        assert not solution.sigma.values.any()
        assert not solution.q.values.any()


class TestSampleSets:
    """Test evaluation point sets."""

    def test_sides_and_counts(self, sphere2):
        samples = sample_sets(sphere2, 10, 12)
        assert len(samples.interior) == 10
        assert len(samples.exterior) == 12
        assert samples.interior.interior.all()
        assert not samples.exterior.interior.any()

    def test_seeded(self, sphere2):
        first = sample_sets(sphere2, 8, 8, seed=3)
        np.testing.assert_array_equal(first.exterior.points, sample_sets(sphere2, 8, 8, seed=3).exterior.points)
        assert not np.allclose(first.exterior.points, sample_sets(sphere2, 8, 8, seed=4).exterior.points)

    def test_cube_samples_around_centroid(self):
        samples = sample_sets(make_cube(), 8, 8)
        assert samples.interior.interior.all()
        np.testing.assert_allclose(samples.interior.points.mean(axis=0), 0.5, atol=0.2)

    def test_empty_request(self, sphere1):
        with pytest.raises(ConfigurationError):
            sample_sets(sphere1, 0, 4)

    def test_fibonacci_directions(self):
        directions = fibonacci_directions(50)
        np.testing.assert_allclose(np.linalg.norm(directions, axis=1), 1.0)
        np.testing.assert_allclose(directions.mean(axis=0), 0.0, atol=5e-2)


class TestSphereOracle:
    """Test the Rayleigh quotient oracle."""

    def test_single_layer_of_constant(self, sphere3, operators3):
        assert sphere_harmonic_oracle(sphere3, 0, OperatorTag.SINGLE_LAYER, operators3) == pytest.approx(1.0, abs=2e-2)

    def test_hypersingular_of_constant(self, sphere2, operators2):
        assert sphere_harmonic_oracle(sphere2, 0, OperatorTag.HYPERSINGULAR, operators2) == pytest.approx(0.0, abs=1e-8)

    def test_non_spherical_mesh(self):
        with pytest.raises(ConfigurationError, match="unit sphere"):
            sphere_harmonic_oracle(make_cube(), 0, OperatorTag.SINGLE_LAYER)

    def test_harmonic_degree(self):
        points = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
        np.testing.assert_allclose(solid_harmonic(points, 2), [2.0, -1.0])
        with pytest.raises(ConfigurationError):
            solid_harmonic(points, 3)


class TestConvergenceStudy:
    """Test the refinement study."""

    def test_needs_three_levels(self):
        with pytest.raises(ConfigurationError):
            convergence_study(default_case(), [2, 3])

    def test_table(self, tmp_path):
        table = convergence_study(default_case(), [0, 1, 2], n_samples=16)
        assert list(table.frame.columns) == CSV_COLUMNS
        assert table.frame["N"].tolist() == [12, 42, 162]
        assert np.isnan(table.frame["order_estimate"].iloc[0])
        assert set(table.solutions) == {0, 1, 2}

        path = tmp_path / "convergence.csv"
        table.to_csv(path)
        loaded = pd.read_csv(path)
        assert list(loaded.columns) == CSV_COLUMNS
        assert loaded["level"].tolist() == [0, 1, 2]

    @pytest.mark.slow
    def test_order(self):
        table = convergence_study(default_case(), [2, 3, 4])
        assert table.order >= 0.8

    @pytest.mark.slow
    def test_order_pure_jump(self):
        table = convergence_study(default_case(1.0, 1.0), [2, 3, 4])
        assert table.order >= 0.8
