"""Tests for the Galerkin boundary operators."""

import numpy as np
import pytest

from jumpbem.exceptions import EXIT_IO, ConfigurationError, JumpBEMError
from jumpbem.mesh import make_cube
from jumpbem.operators import (
    QuadratureOrders,
    align_pairs,
    assemble_all,
    assemble_D,
    assemble_Dtilde,
    assemble_S,
    assemble_Vtilde,
    load_operators,
    save_operators,
    surface_curls,
)
from jumpbem.verification import OperatorTag, sphere_eigenvalue, sphere_harmonic_oracle


class TestStructure:
    """Structural identities of the assembled matrices."""

    def test_jump_operators_degenerate_to_mass(self, operators2):
        mass = operators2.mass.dense
        scale = np.abs(mass).max()
        assert np.abs(operators2.S(1.0).matrix - mass).max() <= 1e-12 * scale
        assert np.abs(operators2.D(1.0).matrix - mass).max() <= 1e-12 * scale

    def test_hypersingular_annihilates_constants(self, operators2):
        hyper = operators2.hypersingular
        assert np.abs(hyper.matrix @ np.ones(hyper.n)).max() <= 1e-10 * hyper.scale

    def test_adjoint_is_negative_transpose(self, operators2):
        np.testing.assert_array_equal(operators2.adjoint_double_layer.matrix, -operators2.double_layer.matrix.T)

    def test_single_layer_symmetric_positive_definite(self, operators2):
        single = operators2.single_layer
        assert single.symmetry_defect == 0.0
        assert np.linalg.eigvalsh(single.matrix).min() > 0.0

    def test_hypersingular_positive_semidefinite(self, operators2):
        hyper = operators2.hypersingular
        assert hyper.symmetry_defect == 0.0
        eigenvalues = np.linalg.eigvalsh(hyper.matrix)
        assert eigenvalues.min() >= -1e-10 * hyper.scale
        # Only the constants are in the kernel.
        assert eigenvalues[1] > 1e-6 * hyper.scale

    def test_double_layer_reproduces_constant(self, operators2):
        """K^ 1 = 1/2 M 1 on a closed surface (Gauss solid-angle identity)."""
        moments = operators2.double_layer.matrix @ np.ones(operators2.n)
        np.testing.assert_allclose(moments, 0.5 * operators2.mass.ones, atol=1e-2 * operators2.mass.ones.max())

    def test_single_layer_of_one_is_mass_ones(self, operators2, operators3):
        """S~ 1 = M 1 on the unit sphere, since U 1 = 1 on the surface."""

        def error(operators):
            ones = operators.mass.ones
            moments = operators.single_layer.matrix @ np.ones(operators.n)
            return np.linalg.norm(moments - ones) / np.linalg.norm(ones)

        assert error(operators3) < 1e-2
        assert error(operators3) < error(operators2)

    def test_adjoint_double_layer_of_one(self, operators2, operators3):
        """(K' + 1/2 M) 1 = 0 on the sphere."""

        def error(operators):
            ones = operators.mass.ones
            moments = operators.adjoint_double_layer.matrix @ np.ones(operators.n) + 0.5 * ones
            return np.linalg.norm(moments) / np.linalg.norm(ones)

        assert error(operators3) < 5e-2
        assert error(operators3) < error(operators2)

    @pytest.mark.parametrize("eps1", [0.5, 2.0, 4.0])
    def test_flux_jump_operator_of_one(self, eps1, operators3):
        """S(eps1) 1 = eps1 M 1 on the sphere."""
        ones = operators3.mass.ones
        moments = operators3.S(eps1).matrix @ np.ones(operators3.n)
        assert np.linalg.norm(moments - eps1 * ones) / np.linalg.norm(eps1 * ones) < 5e-2

    def test_space_tags(self, operators1):
        assert operators1.single_layer.domain.value == "flux"
        assert operators1.single_layer.range.value == "trace"
        assert operators1.hypersingular.domain.value == "trace"
        assert operators1.hypersingular.range.value == "flux"
        assert operators1.S(2.0).domain.value == "flux"
        assert operators1.D(2.0).range.value == "trace"

    def test_trace_operators(self, operators1):
        mass = operators1.mass.dense
        np.testing.assert_allclose(
            operators1.interior_value_trace().matrix - operators1.exterior_value_trace().matrix, mass
        )
        np.testing.assert_allclose(
            operators1.interior_flux_trace().matrix - operators1.exterior_flux_trace().matrix, mass
        )

    def test_surface_curls_sum_to_zero(self, sphere1):
        curls = surface_curls(sphere1)
        np.testing.assert_allclose(curls.sum(axis=1), 0.0, atol=1e-12)
        # Each curl is tangent to its panel.
        np.testing.assert_allclose(np.einsum("fkd,fd->fk", curls, sphere1.normals), 0.0, atol=1e-12)


class TestSphereSpectra:
    """Rayleigh quotients of sphere harmonics against the analytic eigenvalues."""

    @pytest.mark.parametrize("degree", [0, 1, 2])
    def test_single_layer_converges(self, degree, sphere2, operators2, sphere3, operators3):
        exact = sphere_eigenvalue(OperatorTag.SINGLE_LAYER, degree)
        coarse = abs(sphere_harmonic_oracle(sphere2, degree, OperatorTag.SINGLE_LAYER, operators2) - exact)
        fine = abs(sphere_harmonic_oracle(sphere3, degree, OperatorTag.SINGLE_LAYER, operators3) - exact)
        assert fine * 1.5 <= coarse
        assert fine / exact < 2e-2

    @pytest.mark.parametrize(
        "tag, degree",
        [
            (OperatorTag.DOUBLE_LAYER, 0),
            (OperatorTag.DOUBLE_LAYER, 1),
            (OperatorTag.ADJOINT_DOUBLE_LAYER, 1),
            (OperatorTag.ADJOINT_DOUBLE_LAYER, 2),
            (OperatorTag.HYPERSINGULAR, 1),
            (OperatorTag.HYPERSINGULAR, 2),
        ],
    )
    def test_other_operators(self, tag, degree, sphere3, operators3):
        exact = sphere_eigenvalue(tag, degree)
        value = sphere_harmonic_oracle(sphere3, degree, tag, operators3)
        assert value == pytest.approx(exact, rel=8e-2, abs=5e-3)


class TestAssembly:
    """Test assembly entry points."""

    def test_cached(self, sphere1, operators1):
        assert assemble_all(sphere1) is operators1

    def test_thin_views(self, sphere1, operators1):
        assert assemble_Vtilde(sphere1) is operators1.single_layer
        assert assemble_Dtilde(sphere1) is operators1.hypersingular
        np.testing.assert_array_equal(assemble_S(sphere1, 2.0).matrix, operators1.S(2.0).matrix)
        np.testing.assert_array_equal(assemble_D(sphere1, 0.5).matrix, operators1.D(0.5).matrix)

    def test_threads_do_not_change_results(self, sphere1, operators1):
        threaded = assemble_all(sphere1, threads=3)
        np.testing.assert_array_equal(threaded.single_layer.matrix, operators1.single_layer.matrix)
        np.testing.assert_array_equal(threaded.double_layer.matrix, operators1.double_layer.matrix)
        np.testing.assert_array_equal(threaded.hypersingular.matrix, operators1.hypersingular.matrix)

    def test_higher_orders_change_little(self, sphere1, operators1):
        finer = assemble_all(sphere1, QuadratureOrders(regular_degree=10, singular_order=10))
        difference = np.abs(finer.single_layer.matrix - operators1.single_layer.matrix).max()
        assert difference < 1e-3 * operators1.single_layer.scale

    def test_timings_recorded(self, operators1):
        assert {"mass", "far_field", "singular", "hypersingular"} <= set(operators1.timings)

    @pytest.mark.parametrize("eps", [0.0, -1.0, float("nan")])
    def test_invalid_eps(self, sphere1, eps):
        with pytest.raises(ConfigurationError):
            assemble_S(sphere1, eps)
        with pytest.raises(ConfigurationError):
            assemble_D(sphere1, eps)

    def test_invalid_threads(self, sphere1):
        with pytest.raises(ConfigurationError):
            assemble_all(sphere1, threads=0)

    def test_cube_assembles(self):
        operators = assemble_all(make_cube())
        assert operators.n == 8
        assert np.linalg.eigvalsh(operators.single_layer.matrix).min() > 0.0


class TestAlignPairs:
    """Test local corner alignment of touching panels."""

    def test_shared_edge(self):
        triangles = np.array([[0, 1, 2], [3, 1, 0]])
        perm_t, perm_s = align_pairs(triangles, np.array([0]), np.array([1]))
        aligned_t = np.take_along_axis(triangles[[0]], perm_t, axis=1)
        aligned_s = np.take_along_axis(triangles[[1]], perm_s, axis=1)
        np.testing.assert_array_equal(aligned_t, [[0, 1, 2]])
        np.testing.assert_array_equal(aligned_s, [[0, 1, 3]])

    def test_shared_vertex(self):
        triangles = np.array([[4, 5, 6], [7, 8, 6]])
        perm_t, perm_s = align_pairs(triangles, np.array([0]), np.array([1]))
        assert np.take_along_axis(triangles[[0]], perm_t, axis=1)[0, 0] == 6
        assert np.take_along_axis(triangles[[1]], perm_s, axis=1)[0, 0] == 6


class TestOperatorFiles:
    """Test binary operator dumps."""

    def test_round_trip(self, tmp_path, operators1):
        path = tmp_path / "ops.bin"
        save_operators({"single": operators1.single_layer, "double": operators1.double_layer}, path)
        loaded = load_operators(path)
        assert list(loaded) == ["single", "double"]
        np.testing.assert_array_equal(loaded["single"].matrix, operators1.single_layer.matrix)
        assert loaded["single"].symmetric
        assert loaded["double"].domain is operators1.double_layer.domain

    def test_not_an_operator_file(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"hello\n")
        with pytest.raises(JumpBEMError) as info:
            load_operators(path)
        assert info.value.exit_code == EXIT_IO

    def test_truncated(self, tmp_path, operators1):
        path = tmp_path / "ops.bin"
        save_operators({"single": operators1.single_layer}, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(JumpBEMError, match="truncated"):
            load_operators(path)
