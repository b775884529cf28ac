"""Processing pipeline for jumpbem: mesh, assembly, solves, verification and benchmarks."""

import logging
import statistics
from dataclasses import replace
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .config import Config
from .exceptions import EXIT_IO, EXIT_RESOURCE, ConfigurationError, JumpBEMError
from .mesh import SurfaceMesh, load_off, make_cube, make_icosphere
from .operators import OperatorSet, assemble_all
from .potentials import distance_to_mesh
from .solver import (
    CostComparison,
    JumpProblemData,
    JumpSolution,
    Method,
    block_residual,
    cost_report,
    solution_to_dict,
    solve_monolithic,
    solve_sequential,
    write_json,
)
from .spaces import DualVector, SpaceTag
from .verification import (
    ConvergenceTable,
    ErrorNorms,
    ManufacturedProblem,
    convergence_study,
    make_manufactured,
    sample_sets,
    solution_error_norms,
)

logger = logging.getLogger(__name__)

BENCH_COLUMNS = [
    "N",
    "repetitions",
    "sequential_time",
    "monolithic_time",
    "measured_ratio",
    "modeled_ratio",
    "flop_ratio",
    "reference_ratio",
    "sequential_factorizations",
    "sequential_multi_rhs_solves",
    "monolithic_factorizations",
]


class SolveResult:
    """Result of a solve run."""

    def __init__(
        self,
        solutions: Dict[str, JumpSolution],
        residuals: Dict[str, float],
        errors: Dict[str, ErrorNorms],
        method_difference: Optional[float] = None,
        output_path: Optional[Path] = None,
    ):
        self.solutions = solutions
        self.residuals = residuals
        self.errors = errors
        self.method_difference = method_difference
        self.output_path = output_path
        self.completed_at = datetime.now()


class ConvergenceResult:
    """Result of a convergence study."""

    def __init__(self, table: ConvergenceTable, output_path: Optional[Path] = None):
        self.table = table
        self.output_path = output_path
        self.completed_at = datetime.now()


class BenchResult:
    """Result of a sequential against monolithic benchmark."""

    def __init__(
        self,
        frame: pd.DataFrame,
        comparisons: List[CostComparison],
        output_path: Optional[Path] = None,
        raw: Optional[List[Dict]] = None,
    ):
        self.frame = frame
        self.comparisons = comparisons
        self.output_path = output_path
        self.raw = raw or []
        self.completed_at = datetime.now()


def density_difference(first: JumpSolution, second: JumpSolution) -> float:
    """Largest relative difference between the sigma and q of two solutions."""
    worst = 0.0
    for a, b in ((first.sigma.values, second.sigma.values), (first.q.values, second.q.values)):
        scale = float(np.linalg.norm(b))
        delta = float(np.linalg.norm(a - b))
        worst = max(worst, delta / scale if scale > 0.0 else delta)
    return worst


JUMP_DATA_COLUMNS = ["g0", "g1"]


def save_jump_data(data: JumpProblemData, path: Union[str, Path], float_format: str = "%.17e") -> None:
    """Write per-vertex trace-jump and flux-jump moments as CSV."""
    frame = pd.DataFrame({"g0": data.g0.moments, "g1": data.g1.moments})
    try:
        frame.to_csv(path, index=False, float_format=float_format)
    except OSError as e:
        raise JumpBEMError(f"cannot write {path}: {e}", EXIT_IO) from e


def load_jump_data(path: Union[str, Path], n: int, eps0: float, eps1: float) -> JumpProblemData:
    """Read a CSV with one row of moments (g0, g1) per mesh vertex."""
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except OSError as e:
        raise JumpBEMError(f"cannot read jump data {path}: {e}", EXIT_IO) from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ConfigurationError(f"cannot parse jump data {path}: {e}") from e

    missing = [column for column in JUMP_DATA_COLUMNS if column not in frame.columns]
    if missing:
        raise ConfigurationError(f"jump data {path} lacks columns {missing}")
    if len(frame) != n:
        raise ConfigurationError(f"jump data {path} has {len(frame)} rows, mesh has {n} vertices")
    values = frame[JUMP_DATA_COLUMNS].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    if not np.isfinite(values).all():
        raise ConfigurationError(f"jump data {path} has missing or non-numeric moments")
    logger.info(f"Jump data loaded from {path}")
    return JumpProblemData(
        DualVector(values[:, 0], SpaceTag.TRACE), DualVector(values[:, 1], SpaceTag.FLUX), eps0, eps1
    )


class Pipeline:
    """Main processing pipeline."""

    def __init__(self, config: Config):
        self.config = config

        self._setup_logging()

        logger.info("Pipeline initialized")

    def _setup_logging(self):
        """Setup logging configuration."""
        logging.basicConfig(
            level=getattr(logging, self.config.logging.level.upper()),
            format=self.config.logging.format,
            handlers=None if self.config.logging.console else [logging.NullHandler()],
        )

    def build_mesh(self, path: Optional[Union[str, Path]] = None) -> SurfaceMesh:
        """Load the OFF file if one is given, otherwise run the configured generator."""
        mesh_config = self.config.mesh
        path = path or mesh_config.path
        if path is not None:
            mesh = load_off(path)
        elif mesh_config.shape == "cube":
            mesh = make_cube(mesh_config.radius)
        else:
            mesh = make_icosphere(mesh_config.subdivisions, mesh_config.radius)
        logger.info(f"Mesh ready: N={mesh.n_vertices}, panels={mesh.n_panels}, h_max={mesh.h_max:.4f}")
        return mesh

    def assemble(self, mesh: SurfaceMesh) -> OperatorSet:
        performance = self.config.performance
        return assemble_all(
            mesh,
            self.config.quadrature.orders(),
            threads=performance.threads,
            chunk_panels=performance.chunk_panels,
        )

    def manufactured(self, mesh: SurfaceMesh) -> ManufacturedProblem:
        """The configured manufactured case placed about the mesh centroid."""
        scale = float(np.linalg.norm(mesh.vertices - mesh.centroid, axis=1).max())
        case = self.config.verification.case(
            self.config.solver.eps0, self.config.solver.eps1, center=tuple(mesh.centroid), scale=scale
        )
        degree = self.config.quadrature.regular_degree + self.config.quadrature.data_degree_boost
        return make_manufactured(mesh, case, degree, self.config.verification.mean_zero_jump)

    def _methods(self, method: Optional[str] = None) -> List[Method]:
        method = method or self.config.solver.method
        if method == "both":
            return [Method.SEQUENTIAL, Method.MONOLITHIC]
        return [Method(method)]

    def _run_method(self, method: Method, operators: OperatorSet, data: JumpProblemData) -> JumpSolution:
        solver = self.config.solver
        if method is Method.SEQUENTIAL:
            return solve_sequential(
                operators,
                data,
                special_case_tolerance=solver.special_case_tolerance,
                compatibility_warning=solver.compatibility_warning,
            )
        return solve_monolithic(operators, data, compatibility_warning=solver.compatibility_warning)

    def solve(
        self,
        mesh_path: Optional[Union[str, Path]] = None,
        method: Optional[str] = None,
        output_path: Optional[Union[str, Path]] = None,
        data_path: Optional[Union[str, Path]] = None,
        save_data_path: Optional[Union[str, Path]] = None,
    ) -> SolveResult:
        """Solve with one or both methods for manufactured or file-supplied jump data.

        Error norms need the exact field, so they are computed only for the
        manufactured case.
        """
        logger.info("Starting solve")
        mesh = self.build_mesh(mesh_path)
        operators = self.assemble(mesh)
        if data_path is not None:
            problem = None
            data = load_jump_data(data_path, mesh.n_vertices, self.config.solver.eps0, self.config.solver.eps1)
        else:
            problem = self.manufactured(mesh)
            data = problem.data
        if save_data_path is not None:
            save_jump_data(data, save_data_path)
            logger.info(f"Jump data written to {save_data_path}")

        solutions: Dict[str, JumpSolution] = {}
        residuals: Dict[str, float] = {}
        for m in self._methods(method):
            solutions[m.value] = self._run_method(m, operators, data)
            residuals[m.value] = block_residual(operators, data, solutions[m.value])

        errors = self._error_norms(mesh, solutions, problem) if problem is not None else {}

        difference = None
        if len(solutions) == 2:
            difference = density_difference(solutions[Method.SEQUENTIAL.value], solutions[Method.MONOLITHIC.value])
            logger.info(f"Sequential and monolithic densities differ by {difference:.3e}")

        if output_path is not None:
            output_path = Path(output_path)
            records = {}
            for key, solution in solutions.items():
                records[key] = {**solution_to_dict(solution), "block_residual": residuals[key]}
                if key in errors:
                    records[key]["errors"] = errors[key].dict()
            if len(records) == 1:
                record = next(iter(records.values()))
            else:
                record = {**records, "method_difference": difference}
            record["mesh"] = {"n_vertices": mesh.n_vertices, "n_panels": mesh.n_panels, "h_max": mesh.h_max}
            record["data_source"] = "manufactured" if data_path is None else str(data_path)
            write_json(record, output_path, pretty=self.config.output.pretty_json)
            logger.info(f"Solution written to {output_path}")

        return SolveResult(solutions, residuals, errors, difference, output_path)

    def _error_norms(
        self, mesh: SurfaceMesh, solutions: Dict[str, JumpSolution], problem: ManufacturedProblem
    ) -> Dict[str, ErrorNorms]:
        verification = self.config.verification
        inradius = float(distance_to_mesh(mesh, mesh.centroid[None, :])[0])
        if inradius * verification.interior_factor < verification.guard_factor * mesh.h_max:
            logger.warning("Mesh too coarse for interior samples; skipping error norms")
            return {}
        samples = sample_sets(
            mesh,
            verification.n_interior,
            verification.n_exterior,
            verification.interior_factor,
            verification.exterior_factor,
            seed=self.config.performance.seed,
            guard_factor=verification.guard_factor,
        )
        return {
            key: solution_error_norms(
                mesh,
                solution,
                problem.case,
                samples,
                degree=self.config.quadrature.evaluation_degree,
                threads=self.config.performance.threads,
            )
            for key, solution in solutions.items()
        }

    def converge(
        self, levels: Optional[Sequence[int]] = None, output_path: Optional[Union[str, Path]] = None
    ) -> ConvergenceResult:
        """Run the manufactured case over icosphere levels and write the CSV table."""
        levels = list(levels) if levels is not None else list(self.config.verification.levels)
        logger.info(f"Starting convergence study over levels {levels}")
        method = self._methods()[0]
        radius = self.config.mesh.radius
        case = self.config.verification.case(self.config.solver.eps0, self.config.solver.eps1, scale=radius)
        table = convergence_study(
            case,
            levels,
            radius=radius,
            orders=self.config.quadrature.orders(),
            method=method,
            data_degree_boost=self.config.quadrature.data_degree_boost,
            evaluation_degree=self.config.quadrature.evaluation_degree,
            n_samples=self.config.verification.n_exterior,
            seed=self.config.performance.seed,
            threads=self.config.performance.threads,
            chunk_panels=self.config.performance.chunk_panels,
            mean_zero_jump=self.config.verification.mean_zero_jump,
        )
        if output_path is not None:
            output_path = Path(output_path)
            try:
                table.to_csv(output_path, self.config.output.float_format)
            except OSError as e:
                raise JumpBEMError(f"cannot write {output_path}: {e}", EXIT_IO) from e
            logger.info(f"Convergence table written to {output_path}")
        logger.info(f"Estimated order {table.order:.3f}")
        return ConvergenceResult(table, output_path)

    def bench(
        self,
        levels: Optional[Sequence[int]] = None,
        repetitions: Optional[int] = None,
        output_path: Optional[Union[str, Path]] = None,
    ) -> BenchResult:
        """Median wall times of both solvers per icosphere level, with the modeled cost ratio."""
        levels = list(levels) if levels is not None else list(self.config.benchmark.levels)
        repetitions = repetitions or self.config.benchmark.repetitions
        rows, comparisons, raw = [], [], []
        for level in levels:
            try:
                mesh = make_icosphere(level, self.config.mesh.radius)
                operators = self.assemble(mesh)
                problem = self.manufactured(mesh)
                runs: Dict[Method, List[JumpSolution]] = {m: [] for m in Method}
                for _ in range(repetitions):
                    for m in Method:
                        runs[m].append(self._run_method(m, operators, problem.data))
            except MemoryError as e:
                raise JumpBEMError(f"out of memory benchmarking level {level}", EXIT_RESOURCE) from e

            sequential, monolithic = runs[Method.SEQUENTIAL][0].report, runs[Method.MONOLITHIC][0].report
            seq_time = statistics.median(s.report.total_time for s in runs[Method.SEQUENTIAL])
            mono_time = statistics.median(s.report.total_time for s in runs[Method.MONOLITHIC])
            comparison = replace(
                cost_report(sequential, monolithic, mesh.n_vertices),
                sequential_time=seq_time,
                monolithic_time=mono_time,
            )
            comparisons.append(comparison)
            for m in Method:
                raw.extend(
                    {"N": mesh.n_vertices, "repetition": i, **s.report.dict()} for i, s in enumerate(runs[m])
                )
            rows.append(
                {
                    **comparison.dict(),
                    "repetitions": repetitions,
                    "sequential_factorizations": sequential.factorizations,
                    "sequential_multi_rhs_solves": sequential.multi_rhs_solves,
                    "monolithic_factorizations": monolithic.factorizations,
                }
            )
            logger.info(
                f"Bench N={mesh.n_vertices}: sequential {seq_time:.3f}s, monolithic {mono_time:.3f}s, "
                f"ratio {comparison.measured_ratio:.3f} (reference {comparison.reference_ratio})"
            )

        frame = pd.DataFrame(rows, columns=BENCH_COLUMNS)
        if output_path is not None:
            output_path = Path(output_path)
            try:
                frame.to_csv(output_path, index=False, float_format=self.config.output.float_format)
            except OSError as e:
                raise JumpBEMError(f"cannot write {output_path}: {e}", EXIT_IO) from e
        return BenchResult(frame, comparisons, output_path, raw)
