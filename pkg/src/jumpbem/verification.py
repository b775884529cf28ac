"""Manufactured solutions, error norms, sphere spectra and convergence studies."""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd

from .exceptions import ConfigurationError
from .mesh import SurfaceMesh, make_icosphere
from .operators import OperatorSet, QuadratureOrders, assemble_all
from .potentials import EvaluationSet, classify_sides, distance_to_mesh, eval_solution, make_evaluation_set
from .quadrature import FOUR_PI, MAX_DEGREE, gauss_rule
from .solver import JumpProblemData, JumpSolution, Method, solve_monolithic, solve_sequential
from .spaces import CoefficientVector, DualVector, SpaceTag, project_mean_zero

logger = logging.getLogger(__name__)

SOURCE_CLEARANCE = 0.1
CSV_COLUMNS = ["level", "N", "h_max", "ext_err", "int_err_mod_const", "order_estimate"]


@dataclass(frozen=True)
class PointSource:
    """Free-space point source with potential strength / (4 pi |x - s|)."""

    location: Tuple[float, float, float]
    strength: float = 1.0

    def potential(self, x: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        r = np.linalg.norm(x - np.asarray(self.location), axis=-1)
        return self.strength / (FOUR_PI * r)

    def gradient(self, x: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        d = x - np.asarray(self.location)
        r = np.linalg.norm(d, axis=-1)
        return -self.strength * d / (FOUR_PI * r[..., None] ** 3)


def _field(sources: Sequence[PointSource], x: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    total = np.zeros(x.shape[:-1])
    for source in sources:
        total += source.potential(x)
    return total


def _field_gradient(sources: Sequence[PointSource], x: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    total = np.zeros(x.shape)
    for source in sources:
        total += source.gradient(x)
    return total


@dataclass(frozen=True)
class ManufacturedCase:
    """Interior field from sources outside the surface, exterior field from sources inside.

    `interior_constant` is added to the interior field.
    """

    interior_sources: Tuple[PointSource, ...] = ()
    exterior_sources: Tuple[PointSource, ...] = ()
    eps0: float = 2.0
    eps1: float = 2.0
    interior_constant: float = 0.0

    def interior_field(self, x: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        return _field(self.interior_sources, x) + self.interior_constant

    def exterior_field(self, x: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        return _field(self.exterior_sources, x)

    def exact(self, pts: EvaluationSet) -> npt.NDArray[np.float64]:
        return np.where(pts.interior, self.interior_field(pts.points), self.exterior_field(pts.points))

    def value_jump(self, x: npt.NDArray[np.float64], eps0: Optional[float] = None) -> npt.NDArray[np.float64]:
        eps0 = 1.0 if eps0 is None else eps0
        return self.interior_field(x) - eps0 * self.exterior_field(x)

    def flux_jump(
        self, x: npt.NDArray[np.float64], normals: npt.NDArray[np.float64], eps1: Optional[float] = None
    ) -> npt.NDArray[np.float64]:
        eps1 = 1.0 if eps1 is None else eps1
        inner = np.einsum("...d,...d->...", _field_gradient(self.interior_sources, x), normals)
        outer = np.einsum("...d,...d->...", _field_gradient(self.exterior_sources, x), normals)
        return inner - eps1 * outer


def default_case(eps0: float = 2.0, eps1: float = 2.0, radius: float = 1.0) -> ManufacturedCase:
    """Two-source case: one source outside for the interior field, one inside for the exterior."""
    return ManufacturedCase(
        interior_sources=(PointSource((0.6 * radius, -0.4 * radius, 2.2 * radius), 1.0),),
        exterior_sources=(PointSource((0.15 * radius, 0.1 * radius, -0.2 * radius), 1.0),),
        eps0=eps0,
        eps1=eps1,
    )


def case_from_sources(sources: List[Dict], eps0: float, eps1: float) -> ManufacturedCase:
    """Build a case from records {location, strength, field: interior | exterior}."""
    interior, exterior = [], []
    for record in sources:
        source = PointSource(tuple(float(v) for v in record["location"]), float(record.get("strength", 1.0)))
        kind = record.get("field", "interior")
        if kind == "interior":
            interior.append(source)
        elif kind == "exterior":
            exterior.append(source)
        else:
            raise ConfigurationError(f"source field must be 'interior' or 'exterior', got {kind!r}")
    return ManufacturedCase(tuple(interior), tuple(exterior), eps0, eps1)


def _radius_scale(mesh: SurfaceMesh) -> float:
    return float(np.linalg.norm(mesh.vertices - mesh.centroid, axis=1).max())


def check_clearance(mesh: SurfaceMesh, case: ManufacturedCase) -> None:
    """Sources of the interior field must lie outside, those of the exterior field inside."""
    minimum = SOURCE_CLEARANCE * _radius_scale(mesh)
    for sources, want_inside, name in (
        (case.interior_sources, False, "interior-field"),
        (case.exterior_sources, True, "exterior-field"),
    ):
        if not sources:
            continue
        locations = np.array([s.location for s in sources], dtype=np.float64)
        inside = classify_sides(mesh, locations)
        distances = distance_to_mesh(mesh, locations)
        for location, is_inside, distance in zip(locations, inside, distances):
            if is_inside != want_inside or distance < minimum:
                side = "inside" if want_inside else "outside"
                raise ConfigurationError(
                    f"{name} source at {location.tolist()} must be {side} the surface "
                    f"with clearance {minimum:.3g} (distance {distance:.3g})"
                )


def _moments(mesh: SurfaceMesh, values: Callable, degree: int) -> npt.NDArray[np.float64]:
    """Moments of a function against the nodal basis; `values(points, normals)` per panel point."""
    rule = gauss_rule(min(degree, MAX_DEGREE))
    points = rule.map(mesh.panel_vertices)
    normals = np.broadcast_to(mesh.normals[:, None, :], points.shape)
    weighted = values(points, normals) * mesh.areas[:, None] * rule.weights[None, :]
    local = weighted @ rule.points
    moments = np.zeros(mesh.n_vertices)
    np.add.at(moments, mesh.triangles, local)
    return moments


@dataclass(frozen=True, eq=False)
class ManufacturedProblem:
    """Jump data with the case (including any interior shift) that produced it."""

    data: JumpProblemData
    case: ManufacturedCase


def make_manufactured(
    mesh: SurfaceMesh, case: ManufacturedCase, degree: int = 8, mean_zero_jump: bool = True
) -> ManufacturedProblem:
    """Moments of the weighted trace and flux jumps of an exact field pair.

    With `mean_zero_jump` the interior field is shifted so the plain trace jump
    has zero mean over the surface.
    """
    check_clearance(mesh, case)
    if mean_zero_jump:
        jump = _moments(mesh, lambda x, n: case.value_jump(x), degree).sum()
        case = replace(case, interior_constant=case.interior_constant - jump / mesh.total_area)
    g0 = _moments(mesh, lambda x, n: case.value_jump(x, case.eps0), degree)
    g1 = _moments(mesh, lambda x, n: case.flux_jump(x, n, case.eps1), degree)
    data = JumpProblemData(DualVector(g0, SpaceTag.TRACE), DualVector(g1, SpaceTag.FLUX), case.eps0, case.eps1)
    return ManufacturedProblem(data=data, case=case)


def exact_densities(
    mesh: SurfaceMesh, case: ManufacturedCase, operators: OperatorSet, degree: int = 8
) -> Tuple[CoefficientVector, CoefficientVector]:
    """L2 projections of the exact flux jump (sigma*) and mean-zero trace jump (q*)."""
    mass = operators.mass
    flux = _moments(mesh, lambda x, n: case.flux_jump(x, n), degree)
    value = _moments(mesh, lambda x, n: case.value_jump(x), degree)
    sigma = mass.solve(DualVector(flux, SpaceTag.FLUX))
    q, _ = project_mean_zero(mass.solve(DualVector(value, SpaceTag.TRACE)), mass)
    return sigma, q


def fibonacci_directions(n: int) -> npt.NDArray[np.float64]:
    """Golden-angle spiral of n unit vectors."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    angle = np.pi * (3.0 - np.sqrt(5.0)) * i
    rho = np.sqrt(1.0 - z**2)
    return np.stack([rho * np.cos(angle), rho * np.sin(angle), z], axis=1)


def _rotation(seed: int) -> npt.NDArray[np.float64]:
    q, r = np.linalg.qr(np.random.default_rng(seed).standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@dataclass(frozen=True, eq=False)
class SampleSets:
    interior: EvaluationSet
    exterior: EvaluationSet


def sample_sets(
    mesh: SurfaceMesh,
    n_interior: int = 64,
    n_exterior: int = 64,
    interior_factor: float = 0.5,
    exterior_factor: float = 2.0,
    seed: int = 0,
    guard_factor: float = 0.05,
) -> SampleSets:
    """Interior points filling a ball around the volume centroid and exterior points on a sphere.

    The ball radius is `interior_factor` times the centroid's distance to the
    surface; the sphere radius is `exterior_factor` times the circumradius.
    """
    if n_interior < 1 or n_exterior < 1:
        raise ConfigurationError("sample sets need at least one interior and one exterior point")
    center = mesh.centroid
    rotation = _rotation(seed)
    inradius = float(distance_to_mesh(mesh, center[None, :])[0])
    radii = interior_factor * inradius * np.cbrt((np.arange(n_interior) + 0.5) / n_interior)
    interior = center + radii[:, None] * (fibonacci_directions(n_interior) @ rotation.T)
    exterior = center + exterior_factor * _radius_scale(mesh) * (fibonacci_directions(n_exterior) @ rotation.T)
    return SampleSets(
        interior=make_evaluation_set(mesh, interior, guard_factor),
        exterior=make_evaluation_set(mesh, exterior, guard_factor),
    )


@dataclass(frozen=True)
class ErrorNorms:
    exterior_rel_l2: float
    interior_rel_l2_mod_const: float
    fitted_constant: float

    def dict(self) -> Dict:
        """Convert to dictionary."""
        return {
            "exterior_rel_l2": self.exterior_rel_l2,
            "interior_rel_l2_mod_const": self.interior_rel_l2_mod_const,
            "fitted_constant": self.fitted_constant,
        }


def _rms(values: npt.NDArray[np.float64]) -> float:
    return float(np.sqrt(np.mean(values**2)))


def _relative(error: float, scale: float) -> float:
    return error / scale if scale > 0.0 else error


def field_errors(
    computed_interior: npt.NDArray[np.float64],
    exact_interior: npt.NDArray[np.float64],
    computed_exterior: npt.NDArray[np.float64],
    exact_exterior: npt.NDArray[np.float64],
) -> ErrorNorms:
    """Relative RMS errors; the interior comparison is modulo the best-fitting constant.

    A vanishing exact field makes the corresponding error absolute.
    """
    if len(computed_interior) == 0 or len(computed_exterior) == 0:
        raise ConfigurationError("error norms need non-empty interior and exterior samples")
    constant = float(np.mean(computed_interior - exact_interior))
    interior = _relative(
        _rms(computed_interior - constant - exact_interior), _rms(exact_interior - np.mean(exact_interior))
    )
    exterior = _relative(_rms(computed_exterior - exact_exterior), _rms(exact_exterior))
    return ErrorNorms(exterior_rel_l2=exterior, interior_rel_l2_mod_const=interior, fitted_constant=constant)


def error_norms(
    mesh: SurfaceMesh,
    sigma: CoefficientVector,
    q: CoefficientVector,
    case: ManufacturedCase,
    samples: SampleSets,
    degree: int = 6,
    threads: int = 1,
) -> ErrorNorms:
    """Evaluate w = U sigma + V q on both sample sets and compare with the exact fields."""
    inside = eval_solution(mesh, sigma, q, samples.interior, degree, threads)
    outside = eval_solution(mesh, sigma, q, samples.exterior, degree, threads)
    return field_errors(inside, case.exact(samples.interior), outside, case.exact(samples.exterior))


def solution_error_norms(
    mesh: SurfaceMesh, solution: JumpSolution, case: ManufacturedCase, samples: SampleSets, **kwargs
) -> ErrorNorms:
    return error_norms(mesh, solution.sigma, solution.q, case, samples, **kwargs)


class OperatorTag(str, Enum):
    SINGLE_LAYER = "single_layer"
    DOUBLE_LAYER = "double_layer"
    ADJOINT_DOUBLE_LAYER = "adjoint_double_layer"
    HYPERSINGULAR = "hypersingular"


def sphere_eigenvalue(tag: OperatorTag, degree: int) -> float:
    """Eigenvalue of a boundary operator on the unit sphere for harmonics of `degree`."""
    n = degree
    return {
        OperatorTag.SINGLE_LAYER: 1.0 / (2 * n + 1),
        OperatorTag.DOUBLE_LAYER: 1.0 / (2 * (2 * n + 1)),
        OperatorTag.ADJOINT_DOUBLE_LAYER: -1.0 / (2 * (2 * n + 1)),
        OperatorTag.HYPERSINGULAR: n * (n + 1) / (2 * n + 1),
    }[OperatorTag(tag)]


def solid_harmonic(points: npt.NDArray[np.float64], degree: int) -> npt.NDArray[np.float64]:
    """Zonal solid harmonics 1, z, 3 z^2 - |x|^2."""
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    if degree == 0:
        return np.ones(len(points))
    if degree == 1:
        return z.copy()
    if degree == 2:
        return 3.0 * z**2 - (x**2 + y**2 + z**2)
    raise ConfigurationError(f"harmonic degree must be 0, 1 or 2, got {degree}")


def sphere_harmonic_oracle(
    mesh: SurfaceMesh, degree: int, tag: OperatorTag, operators: Optional[OperatorSet] = None
) -> float:
    """Rayleigh quotient <A c, c> / <M c, c> of a discretized harmonic on the unit sphere."""
    radii = np.linalg.norm(mesh.vertices, axis=1)
    if np.abs(radii - 1.0).max() > 1e-12:
        raise ConfigurationError("sphere oracle needs every vertex on the unit sphere")
    operators = operators or assemble_all(mesh)
    c = solid_harmonic(mesh.vertices, degree)
    matrix = getattr(operators, OperatorTag(tag).value).matrix
    return float(c @ matrix @ c / (c @ (operators.mass.matrix @ c)))


@dataclass
class ConvergenceTable:
    frame: pd.DataFrame
    order: float
    solutions: Dict[int, JumpSolution] = field(default_factory=dict, repr=False)

    def to_csv(self, path, float_format: str = "%.10e") -> None:
        self.frame.to_csv(path, index=False, float_format=float_format)


def convergence_study(
    case: ManufacturedCase,
    levels: Sequence[int],
    radius: float = 1.0,
    orders: Optional[QuadratureOrders] = None,
    method: Method = Method.SEQUENTIAL,
    data_degree_boost: int = 2,
    evaluation_degree: int = 6,
    n_samples: int = 64,
    seed: int = 0,
    threads: int = 1,
    chunk_panels: int = 4,
    mean_zero_jump: bool = True,
) -> ConvergenceTable:
    """Solve a manufactured case on successive icosphere levels and estimate the order.

    The order is the least-squares slope of log(error) against log(h_max),
    with error the larger of the two sample-set errors.
    """
    levels = list(levels)
    if len(levels) < 3:
        raise ConfigurationError(f"a convergence study needs at least 3 levels, got {len(levels)}")
    orders = orders or QuadratureOrders()
    solve = solve_sequential if Method(method) is Method.SEQUENTIAL else solve_monolithic

    rows, solutions = [], {}
    for level in levels:
        mesh = make_icosphere(level, radius)
        operators = assemble_all(mesh, orders, threads=threads, chunk_panels=chunk_panels)
        problem = make_manufactured(mesh, case, orders.regular_degree + data_degree_boost, mean_zero_jump)
        solution = solve(operators, problem.data)
        samples = sample_sets(mesh, n_samples, n_samples, seed=seed)
        errors = solution_error_norms(
            mesh, solution, problem.case, samples, degree=evaluation_degree, threads=threads
        )
        solutions[level] = solution
        rows.append(
            {
                "level": level,
                "N": mesh.n_vertices,
                "h_max": mesh.h_max,
                "ext_err": errors.exterior_rel_l2,
                "int_err_mod_const": errors.interior_rel_l2_mod_const,
            }
        )
        logger.info(
            f"Level {level}: N={mesh.n_vertices}, ext={errors.exterior_rel_l2:.3e}, "
            f"int={errors.interior_rel_l2_mod_const:.3e}"
        )

    frame = pd.DataFrame(rows)
    error = frame[["ext_err", "int_err_mod_const"]].max(axis=1)
    log_h, log_e = np.log(frame["h_max"].to_numpy()), np.log(error.to_numpy())
    frame["order_estimate"] = np.concatenate([[np.nan], np.diff(log_e) / np.diff(log_h)])
    with np.errstate(divide="ignore", invalid="ignore"):
        order = float(np.polyfit(log_h, log_e, 1)[0]) if np.all(error > 0) else float("nan")
    return ConvergenceTable(frame=frame[CSV_COLUMNS], order=order, solutions=solutions)
