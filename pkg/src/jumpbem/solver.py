"""Solvers for the coupled jump problem.

Unknowns are the single-layer density sigma (flux) and the mean-zero
double-layer density q (trace) of w = U sigma + V q. Data are the trace-jump
moments g0 and flux-jump moments g1. The coupled Galerkin system is

    [(1 - eps0) S~   D(eps0)          M1] [sigma ]   [g0]
    [S(eps1)         (1 - eps1) D~    0 ] [q     ] = [g1]
    [0               (M1)^T           0 ] [lambda]   [0 ]

where M1 = M 1 and lambda absorbs the constant part of the trace data.
`solve_monolithic` factors it whole; `solve_sequential` eliminates it
through the boundary operators Phi = S~ S^-1 and Psi = D~ D^-1, solving
only N-dimensional systems.
"""

import json
import logging
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy.linalg import LinAlgError, LinAlgWarning, lu_factor, lu_solve
from scipy.linalg.lapack import dgecon

from .exceptions import EXIT_IO, EXIT_RESOURCE, ConfigurationError, JumpBEMError, SingularSystemError
from .operators import OperatorSet
from .spaces import CoefficientVector, DualVector, MassMatrix, OperatorMatrix, SpaceTag, project_mean_zero

logger = logging.getLogger(__name__)

SINGULAR_RCOND = 1e-14
ILL_CONDITIONED_RCOND = 1e-10
SPECIAL_CASE_TOLERANCE = 1e-8
COMPATIBILITY_WARNING = 1e-3
REFERENCE_RATIO = 5.0 / 8.0


class Method(str, Enum):
    SEQUENTIAL = "sequential"
    MONOLITHIC = "monolithic"


@dataclass
class SolveReport:
    """Timings and the cubic-cost inventory of one solve."""

    method: Method
    n: int
    branch: str = "general"
    timings: Dict[str, float] = field(default_factory=dict)
    factorization_sizes: List[int] = field(default_factory=list)
    multi_rhs_solves: int = 0
    matrix_products: int = 0
    condition_estimates: Dict[str, float] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    @property
    def factorizations(self) -> int:
        return len(self.factorization_sizes)

    @property
    def total_time(self) -> float:
        return float(sum(self.timings.values()))

    @property
    def cubic_operations(self) -> float:
        """Cost in units of one N x N factorization, one unit per A-formation stage.

        A factorization of size m counts round(m / N)^3 units.
        """
        units = sum(round(size / self.n) ** 3 for size in self.factorization_sizes)
        return units + (1.0 if self.multi_rhs_solves else 0.0)

    @property
    def flops(self) -> float:
        """LAPACK-style flop model: 2/3 m^3 per LU, 2 N^3 per N-column solve or product."""
        n = float(self.n)
        lu = sum(2.0 / 3.0 * float(size) ** 3 for size in self.factorization_sizes)
        return lu + 2.0 * n**3 * (self.multi_rhs_solves + self.matrix_products)

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start

    def dict(self) -> Dict:
        """Convert to dictionary."""
        return {
            "method": self.method.value,
            "n": self.n,
            "branch": self.branch,
            "factorizations": self.factorizations,
            "factorization_sizes": list(self.factorization_sizes),
            "multi_rhs_solves": self.multi_rhs_solves,
            "matrix_products": self.matrix_products,
            "cubic_operations": self.cubic_operations,
            "condition_estimates": dict(sorted(self.condition_estimates.items())),
            "warnings": list(self.warnings),
            "timings": dict(self.timings),
        }


class DenseFactorization:
    """LU factorization with partial pivoting and a 1-norm reciprocal condition estimate."""

    def __init__(self, matrix: npt.NDArray[np.float64], name: str, report: Optional[SolveReport] = None):
        self.name = name
        self.n = int(matrix.shape[0])
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", LinAlgWarning)
                self._lu = lu_factor(matrix, check_finite=True)
        except MemoryError as e:
            raise JumpBEMError(f"not enough memory to factor {name} (size {self.n})", EXIT_RESOURCE) from e
        except (ValueError, LinAlgError) as e:
            raise SingularSystemError(f"cannot factor {name}: {e}") from e

        anorm = float(np.abs(matrix).sum(axis=0).max())
        rcond, info = dgecon(self._lu[0], anorm, norm="1")
        self.rcond = float(rcond) if info == 0 else 0.0
        if not self.rcond > SINGULAR_RCOND:
            raise SingularSystemError(f"{name} is numerically singular", self.rcond)
        if self.rcond < ILL_CONDITIONED_RCOND:
            logger.warning(f"{name} is ill-conditioned (rcond={self.rcond:.3e})")
            if report is not None:
                report.warnings.append(f"{name} ill-conditioned (rcond={self.rcond:.3e})")

        if report is not None:
            report.factorization_sizes.append(self.n)
            report.condition_estimates[name] = self.rcond
        logger.debug(f"Factored {name}: n={self.n}, rcond={self.rcond:.3e}")

    def solve(self, rhs: npt.NDArray[np.float64], transpose: bool = False) -> npt.NDArray[np.float64]:
        return lu_solve(self._lu, rhs, trans=1 if transpose else 0)


class DeflatedFactorization:
    """Factorization of [[A, v], [v^T, 0]] selecting the solution with v^T x = 0."""

    def __init__(
        self,
        matrix: npt.NDArray[np.float64],
        constraint: npt.NDArray[np.float64],
        name: str,
        report: Optional[SolveReport] = None,
    ):
        n = matrix.shape[0]
        augmented = np.zeros((n + 1, n + 1))
        augmented[:n, :n] = matrix
        augmented[:n, n] = constraint
        augmented[n, :n] = constraint
        self.n = n
        self._factor = DenseFactorization(augmented, name, report)

    @property
    def rcond(self) -> float:
        return self._factor.rcond

    def solve(self, rhs: npt.NDArray[np.float64]) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        """Return the constrained solution and the Lagrange multiplier(s)."""
        rhs = np.asarray(rhs, dtype=np.float64)
        padded = np.concatenate([rhs, np.zeros((1,) + rhs.shape[1:])], axis=0)
        solution = self._factor.solve(padded)
        return solution[: self.n], solution[self.n]


@dataclass(frozen=True, eq=False)
class JumpProblemData:
    """Jump data g0 (trace moments), g1 (flux moments) and the weights eps0, eps1."""

    g0: DualVector
    g1: DualVector
    eps0: float
    eps1: float

    def __post_init__(self) -> None:
        for name in ("eps0", "eps1"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise ConfigurationError(f"{name} must be positive, got {value}")
        if self.g0.space is not SpaceTag.TRACE or self.g1.space is not SpaceTag.FLUX:
            raise ConfigurationError("g0 must be trace moments and g1 flux moments")
        if len(self.g0) != len(self.g1):
            raise ConfigurationError(f"g0 has {len(self.g0)} moments but g1 has {len(self.g1)}")

    @property
    def n(self) -> int:
        return len(self.g0)


@dataclass(frozen=True, eq=False)
class JumpSolution:
    """Densities of w = U sigma + V q with solve diagnostics."""

    sigma: CoefficientVector
    q: CoefficientVector
    compatibility_defect: float
    compatibility_defect_relative: float
    lagrange_multiplier: float
    report: SolveReport
    eps0: float
    eps1: float
    constant_component: float = 0.0

    # The interior field is known only up to an additive constant.
    interior_constant_note: str = "interior field determined modulo an additive constant"


def apply_Phi(S_factor: DenseFactorization, single_layer: OperatorMatrix, f1: DualVector) -> DualVector:
    """Phi f1 = S~ S^-1 f1: solve for the single-layer density, return its trace moments."""
    if f1.space is not SpaceTag.FLUX:
        raise ConfigurationError("Phi acts on flux moments")
    sigma = CoefficientVector(S_factor.solve(np.array(f1.moments)), SpaceTag.FLUX)
    return single_layer @ sigma


def apply_Phi_inv(single_factor: DenseFactorization, S: OperatorMatrix, f0: DualVector) -> DualVector:
    """Phi^-1 f0 = S S~^-1 f0."""
    if f0.space is not SpaceTag.TRACE:
        raise ConfigurationError("Phi^-1 acts on trace moments")
    sigma = CoefficientVector(single_factor.solve(np.array(f0.moments)), SpaceTag.FLUX)
    return S @ sigma


def apply_Psi(
    D_factor: DeflatedFactorization, hypersingular: OperatorMatrix, g: DualVector, mass: MassMatrix
) -> Tuple[DualVector, float]:
    """Psi g = D~ D^-1 g on trace moments modulo M1; returns the result and the removed norm."""
    if g.space is not SpaceTag.TRACE:
        raise ConfigurationError("Psi acts on trace moments")
    projected, _ = project_mean_zero(g, mass)
    defect = mass.dual_norm(g - projected)
    rho, _ = D_factor.solve(np.array(projected.moments))
    return hypersingular @ CoefficientVector(rho, SpaceTag.TRACE, mean_zero=True), defect


def apply_Psi_inv(
    Dtilde_factor: DeflatedFactorization, D: OperatorMatrix, h: DualVector, mass: MassMatrix
) -> Tuple[DualVector, float]:
    """Psi^-1 h = D D~^-1 h on zero-total flux moments.

    The result is the representative with zero total moment of a class of
    trace moments modulo M1. Returns it with the norm removed from h.
    """
    if h.space is not SpaceTag.FLUX:
        raise ConfigurationError("Psi^-1 acts on flux moments")
    projected, _ = project_mean_zero(h, mass)
    defect = mass.dual_norm(h - projected)
    tau, _ = Dtilde_factor.solve(np.array(projected.moments))
    trace = D @ CoefficientVector(tau, SpaceTag.TRACE, mean_zero=True)
    return project_mean_zero(trace, mass)[0], defect


def _check_sizes(operators: OperatorSet, data: JumpProblemData) -> None:
    if data.n != operators.n:
        raise ConfigurationError(f"data has {data.n} moments for a mesh with {operators.n} vertices")


def _is_unit(eps: float, tolerance: float) -> bool:
    return abs(1.0 - eps) < tolerance


def _quotient_rows(matrix: npt.NDArray[np.float64], mass: MassMatrix) -> npt.NDArray[np.float64]:
    """Q X with Q = I - M1 1^T / area, applied to the rows of X."""
    return matrix - np.outer(mass.ones, matrix.sum(axis=0)) / mass.area


def _form_reduced_matrix(
    operators: OperatorSet,
    eps0: float,
    eps1: float,
    S_factor: DenseFactorization,
    Dtilde_factor: DeflatedFactorization,
    D: OperatorMatrix,
    report: SolveReport,
) -> npt.NDArray[np.float64]:
    """A' = Q [(1 - eps0)(1 - eps1) Phi - Psi^-1 Pi] + M1 1^T as an explicit matrix."""
    n, mass = operators.n, operators.mass
    with report.stage("form_A"):
        # Phi^T = S^-T S~ since S~ is symmetric.
        phi = S_factor.solve(np.array(operators.single_layer.matrix), transpose=True).T
        flux_projector = np.eye(n) - 1.0 / n
        tau, _ = Dtilde_factor.solve(flux_projector)
        psi_inv = D.matrix @ tau
        report.multi_rhs_solves += 2
        report.matrix_products += 1
        reduced = (1.0 - eps0) * (1.0 - eps1) * phi - psi_inv
        reduced = _quotient_rows(reduced, mass) + np.outer(mass.ones, np.ones(n))
    return reduced


def _compatibility(
    mass: MassMatrix, p0: DualVector, multiplier: float, compatibility_warning: float, report: SolveReport
) -> Tuple[float, float]:
    """Dual norm of lambda M1, the part of p0 outside the range of D on mean-zero traces."""
    defect = mass.dual_norm(DualVector(multiplier * mass.ones, SpaceTag.TRACE))
    scale = mass.dual_norm(p0)
    relative = defect / scale if scale > 0.0 else 0.0
    if relative > compatibility_warning:
        message = f"compatibility defect {relative:.3e} exceeds {compatibility_warning:.1e}"
        logger.warning(message)
        report.warnings.append(message)
    return defect, relative


def _finish_trace_problem(
    operators: OperatorSet,
    p0: DualVector,
    D_factor: DeflatedFactorization,
    compatibility_warning: float,
    report: SolveReport,
) -> Tuple[CoefficientVector, float, float, float, float]:
    """Solve D q + lambda M1 = p0 with mean-zero q through the projected p0."""
    mass = operators.mass
    projected, constant = project_mean_zero(p0, mass)
    with report.stage("solve_q"):
        q, shift = D_factor.solve(np.array(projected.moments))
    multiplier = float(shift) + constant
    defect, relative = _compatibility(mass, p0, multiplier, compatibility_warning, report)
    return CoefficientVector(q, SpaceTag.TRACE, mean_zero=True), defect, relative, multiplier, constant


def solve_sequential(
    operators: OperatorSet,
    data: JumpProblemData,
    special_case_tolerance: float = SPECIAL_CASE_TOLERANCE,
    compatibility_warning: float = COMPATIBILITY_WARNING,
) -> JumpSolution:
    """Solve for sigma through the reduced flux system, then for q from the trace jump."""
    _check_sizes(operators, data)
    n, mass = operators.n, operators.mass
    eps0, eps1 = data.eps0, data.eps1
    report = SolveReport(method=Method.SEQUENTIAL, n=n)
    single_layer, hypersingular = operators.single_layer, operators.hypersingular
    S, D = operators.S(eps1), operators.D(eps0)

    with report.stage("factor_S"):
        S_factor = DenseFactorization(S.matrix, "S", report)
    with report.stage("factor_D"):
        D_factor = DeflatedFactorization(D.matrix, mass.ones, "deflated D", report)

    if _is_unit(eps1, special_case_tolerance):
        report.branch = "pure flux jump"
        p1 = data.g1
    elif _is_unit(eps0, special_case_tolerance):
        report.branch = "pure trace jump"
        q, defect, relative, multiplier, constant = _finish_trace_problem(
            operators, data.g0, D_factor, compatibility_warning, report
        )
        with report.stage("solve_sigma"):
            rhs = data.g1 - (1.0 - eps1) * (hypersingular @ q)
            sigma = CoefficientVector(S_factor.solve(np.array(rhs.moments)), SpaceTag.FLUX)
        return JumpSolution(sigma, q, defect, relative, multiplier, report, eps0, eps1, constant)
    else:
        with report.stage("factor_Dtilde"):
            Dtilde_factor = DeflatedFactorization(hypersingular.matrix, mass.ones, "deflated D~", report)
        reduced = _form_reduced_matrix(operators, eps0, eps1, S_factor, Dtilde_factor, D, report)
        with report.stage("factor_A"):
            A_factor = DenseFactorization(reduced, "A", report)
        with report.stage("solve_p1"):
            psi_inv_g1, _ = apply_Psi_inv(Dtilde_factor, D, data.g1, mass)
            b = (1.0 - eps1) * data.g0 - psi_inv_g1
            rhs = b.moments - mass.ones * b.total() / mass.area + mass.ones * data.g1.total()
            p1 = DualVector(A_factor.solve(rhs), SpaceTag.FLUX)

    with report.stage("solve_sigma"):
        sigma = CoefficientVector(S_factor.solve(np.array(p1.moments)), SpaceTag.FLUX)
        p0 = data.g0 - (1.0 - eps0) * (single_layer @ sigma)
    q, defect, relative, multiplier, constant = _finish_trace_problem(
        operators, p0, D_factor, compatibility_warning, report
    )
    logger.info(f"Sequential solve ({report.branch}) finished in {report.total_time:.2f}s")
    return JumpSolution(sigma, q, defect, relative, multiplier, report, eps0, eps1, constant)


def block_matrix(operators: OperatorSet, eps0: float, eps1: float) -> npt.NDArray[np.float64]:
    """The (2N + 1)-dimensional coupled system matrix."""
    n, ones = operators.n, operators.mass.ones
    try:
        K = np.zeros((2 * n + 1, 2 * n + 1))
    except MemoryError as e:
        raise JumpBEMError(f"not enough memory for a block system of size {2 * n + 1}", EXIT_RESOURCE) from e
    K[:n, :n] = (1.0 - eps0) * operators.single_layer.matrix
    K[:n, n : 2 * n] = operators.D(eps0).matrix
    K[:n, 2 * n] = ones
    K[n : 2 * n, :n] = operators.S(eps1).matrix
    K[n : 2 * n, n : 2 * n] = (1.0 - eps1) * operators.hypersingular.matrix
    K[2 * n, n : 2 * n] = ones
    return K


def solve_monolithic(
    operators: OperatorSet,
    data: JumpProblemData,
    compatibility_warning: float = COMPATIBILITY_WARNING,
) -> JumpSolution:
    """Factor the coupled block system once and solve for (sigma, q, lambda)."""
    _check_sizes(operators, data)
    n, mass = operators.n, operators.mass
    report = SolveReport(method=Method.MONOLITHIC, n=n, branch="block")
    with report.stage("assemble_block"):
        K = block_matrix(operators, data.eps0, data.eps1)
        rhs = np.concatenate([data.g0.moments, data.g1.moments, [0.0]])
    with report.stage("factor_block"):
        factor = DenseFactorization(K, "block system", report)
    with report.stage("solve_block"):
        x = factor.solve(rhs)

    sigma = CoefficientVector(x[:n], SpaceTag.FLUX)
    q = CoefficientVector(x[n : 2 * n], SpaceTag.TRACE, mean_zero=True)
    p0 = data.g0 - (1.0 - data.eps0) * (operators.single_layer @ sigma)
    _, constant = project_mean_zero(p0, mass)
    multiplier = float(x[2 * n])
    defect, relative = _compatibility(mass, p0, multiplier, compatibility_warning, report)
    logger.info(f"Monolithic solve finished in {report.total_time:.2f}s")
    return JumpSolution(sigma, q, defect, relative, multiplier, report, data.eps0, data.eps1, constant)


def block_residual(operators: OperatorSet, data: JumpProblemData, solution: JumpSolution) -> float:
    """||K x - b|| / (||K|| ||x|| + ||b||) of the coupled system, infinity norms."""
    K = block_matrix(operators, data.eps0, data.eps1)
    x = np.concatenate([solution.sigma.values, solution.q.values, [solution.lagrange_multiplier]])
    b = np.concatenate([data.g0.moments, data.g1.moments, [0.0]])
    residual = np.abs(K @ x - b).max()
    scale = np.abs(K).sum(axis=1).max() * np.abs(x).max() + np.abs(b).max()
    return float(residual / scale) if scale > 0.0 else 0.0


def energy_cross_term(operators: OperatorSet, solution: JumpSolution) -> Dict[str, float]:
    """Discrete Dirichlet-energy coupling of U sigma and V q across both sides of the surface.

    Interior minus exterior Green pairings of the flux trace of U sigma with the
    value trace of V q; it vanishes when the two fields are orthogonal.
    """
    mass = operators.mass
    sigma, q = solution.sigma, solution.q

    def pairing(flux: OperatorMatrix, value: OperatorMatrix) -> float:
        moments = value @ q
        return float((flux @ sigma).moments @ mass.solve(moments).values)

    cross = pairing(operators.interior_flux_trace(), operators.interior_value_trace()) - pairing(
        operators.exterior_flux_trace(), operators.exterior_value_trace()
    )
    single_energy = float(sigma.values @ operators.single_layer.matrix @ sigma.values)
    double_energy = float(q.values @ operators.hypersingular.matrix @ q.values)
    total = abs(single_energy) + abs(double_energy)
    return {
        "cross": cross,
        "single_energy": single_energy,
        "double_energy": double_energy,
        "relative": abs(cross) / total if total > 0.0 else 0.0,
    }


def condition_sweep(
    operators: OperatorSet, eps_values: Iterable[float], special_case_tolerance: float = SPECIAL_CASE_TOLERANCE
) -> List[Dict[str, Optional[float]]]:
    """Reciprocal condition estimates of the reduced matrix A over eps0 x eps1 pairs."""
    eps_values = list(eps_values)
    mass = operators.mass
    rows = []
    dtilde_factor = DeflatedFactorization(operators.hypersingular.matrix, mass.ones, "deflated D~")
    for eps1 in eps_values:
        S_factor = DenseFactorization(operators.S(eps1).matrix, "S")
        for eps0 in eps_values:
            row: Dict[str, Optional[float]] = {"eps0": eps0, "eps1": eps1, "rcond_S": S_factor.rcond}
            if _is_unit(eps0, special_case_tolerance) or _is_unit(eps1, special_case_tolerance):
                row["rcond_A"] = None
            else:
                report = SolveReport(method=Method.SEQUENTIAL, n=operators.n)
                D = operators.D(eps0)
                reduced = _form_reduced_matrix(operators, eps0, eps1, S_factor, dtilde_factor, D, report)
                row["rcond_A"] = DenseFactorization(reduced, "A").rcond
            rows.append(row)
            logger.debug(f"Condition sweep eps0={eps0:g} eps1={eps1:g}: rcond_A={row['rcond_A']}")
    return rows


@dataclass(frozen=True)
class CostComparison:
    """Sequential against monolithic cost at one problem size."""

    n: int
    sequential_time: float
    monolithic_time: float
    sequential_units: float
    monolithic_units: float
    sequential_flops: float
    monolithic_flops: float

    @property
    def measured_ratio(self) -> float:
        return self.sequential_time / self.monolithic_time if self.monolithic_time > 0 else float("nan")

    @property
    def modeled_ratio(self) -> float:
        return self.sequential_units / self.monolithic_units

    @property
    def flop_ratio(self) -> float:
        return self.sequential_flops / self.monolithic_flops

    @property
    def reference_ratio(self) -> float:
        return REFERENCE_RATIO

    def dict(self) -> Dict:
        """Convert to dictionary."""
        return {
            "N": self.n,
            "sequential_time": self.sequential_time,
            "monolithic_time": self.monolithic_time,
            "measured_ratio": self.measured_ratio,
            "modeled_ratio": self.modeled_ratio,
            "flop_ratio": self.flop_ratio,
            "reference_ratio": self.reference_ratio,
        }


def cost_report(sequential: SolveReport, monolithic: SolveReport, n: int) -> CostComparison:
    """Compare two solve reports at the same N."""
    if sequential.n != n or monolithic.n != n:
        raise ConfigurationError(f"reports are for N={sequential.n} and N={monolithic.n}, expected {n}")
    # A factorization of dimension 2N + 1 counts as the 8 N^3 of the 2N system.
    monolithic_units = sum(round(size / n) ** 3 for size in monolithic.factorization_sizes)
    return CostComparison(
        n=n,
        sequential_time=sequential.total_time,
        monolithic_time=monolithic.total_time,
        sequential_units=sequential.factorizations + (1.0 if sequential.multi_rhs_solves else 0.0),
        monolithic_units=float(monolithic_units),
        sequential_flops=sequential.flops,
        monolithic_flops=monolithic.flops,
    )


def solution_to_dict(solution: JumpSolution) -> Dict:
    """JSON-ready record; every wall-clock field sits under report.timings."""
    return {
        "method": solution.report.method.value,
        "N": len(solution.sigma),
        "eps0": solution.eps0,
        "eps1": solution.eps1,
        "sigma": solution.sigma.values.tolist(),
        "q": solution.q.values.tolist(),
        "compatibility_defect": solution.compatibility_defect,
        "compatibility_defect_relative": solution.compatibility_defect_relative,
        "constant_component": solution.constant_component,
        "lagrange_multiplier": solution.lagrange_multiplier,
        "interior_constant_note": solution.interior_constant_note,
        "report": solution.report.dict(),
    }


def write_json(record: Dict, path: Union[str, Path], pretty: bool = True) -> None:
    """Write a record with sorted keys."""
    try:
        with open(path, "w") as f:
            json.dump(record, f, indent=2 if pretty else None, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise JumpBEMError(f"cannot write {path}: {e}", EXIT_IO) from e


def write_solution_json(
    solutions: Union[JumpSolution, Dict[str, JumpSolution]],
    path: Union[str, Path],
    extra: Optional[Dict] = None,
    pretty: bool = True,
) -> None:
    """Write one solution as a flat record, or several keyed by method."""
    if isinstance(solutions, JumpSolution):
        record = solution_to_dict(solutions)
    else:
        record = {key: solution_to_dict(value) for key, value in solutions.items()}
    if extra:
        record.update(extra)
    write_json(record, path, pretty)
