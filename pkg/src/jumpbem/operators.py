"""Galerkin assembly of the boundary operators on continuous piecewise-linear functions.

One pass over the mesh produces every matrix the solvers need:

- mass matrix M,
- single layer S~ with kernel 1/(4 pi |x - y|) (flux -> trace),
- double layer K^ with kernel (y - x).n_y / (4 pi |x - y|^3) (trace -> trace),
- its discrete adjoint K' = -K^T (flux -> flux),
- hypersingular D~ through the surface-curl (Maue) form (trace -> flux).

Interior and exterior traces are +-1/2 M + K' and +-1/2 M + K^, so the jump
operators are S(eps1) = (1 + eps1)/2 M + (1 - eps1) K' and
D(eps0) = (1 + eps0)/2 M + (1 - eps0) K^.
"""

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy import sparse

from .exceptions import EXIT_IO, ConfigurationError, JumpBEMError
from .mesh import SurfaceMesh
from .quadrature import FOUR_PI, PanelConfiguration, PanelPairRule, gauss_rule, singular_pair_rule
from .spaces import MassMatrix, OperatorMatrix, SpaceTag

logger = logging.getLogger(__name__)

_SINGULAR_BATCH = 64
_OPERATOR_MAGIC = b"JUMPBEM-OPERATORS 1\n"


@dataclass(frozen=True)
class QuadratureOrders:
    """Regular triangle-rule degree and singular pair-rule order used in assembly."""

    regular_degree: int = 6
    singular_order: int = 8


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """All assembled matrices of one mesh."""

    mesh: SurfaceMesh
    mass: MassMatrix
    single_layer: OperatorMatrix
    double_layer: OperatorMatrix
    adjoint_double_layer: OperatorMatrix
    hypersingular: OperatorMatrix
    orders: QuadratureOrders
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.mesh.n_vertices

    def S(self, eps1: float) -> OperatorMatrix:
        """Flux-jump operator gamma_1^i U - eps1 gamma_1^e U."""
        _check_eps("eps1", eps1)
        matrix = 0.5 * (1.0 + eps1) * self.mass.dense + (1.0 - eps1) * self.adjoint_double_layer.matrix
        return OperatorMatrix(matrix, SpaceTag.FLUX, SpaceTag.FLUX, name=f"S(eps1={eps1:g})")

    def D(self, eps0: float) -> OperatorMatrix:
        """Trace-jump operator gamma_0^i V - eps0 gamma_0^e V."""
        _check_eps("eps0", eps0)
        matrix = 0.5 * (1.0 + eps0) * self.mass.dense + (1.0 - eps0) * self.double_layer.matrix
        return OperatorMatrix(matrix, SpaceTag.TRACE, SpaceTag.TRACE, name=f"D(eps0={eps0:g})")

    def interior_flux_trace(self) -> OperatorMatrix:
        """gamma_1^i U = 1/2 M + K'."""
        matrix = 0.5 * self.mass.dense + self.adjoint_double_layer.matrix
        return OperatorMatrix(matrix, SpaceTag.FLUX, SpaceTag.FLUX, name="interior flux trace")

    def exterior_flux_trace(self) -> OperatorMatrix:
        """gamma_1^e U = -1/2 M + K'."""
        matrix = -0.5 * self.mass.dense + self.adjoint_double_layer.matrix
        return OperatorMatrix(matrix, SpaceTag.FLUX, SpaceTag.FLUX, name="exterior flux trace")

    def interior_value_trace(self) -> OperatorMatrix:
        """gamma_0^i V = 1/2 M + K^."""
        matrix = 0.5 * self.mass.dense + self.double_layer.matrix
        return OperatorMatrix(matrix, SpaceTag.TRACE, SpaceTag.TRACE, name="interior value trace")

    def exterior_value_trace(self) -> OperatorMatrix:
        """gamma_0^e V = -1/2 M + K^."""
        matrix = -0.5 * self.mass.dense + self.double_layer.matrix
        return OperatorMatrix(matrix, SpaceTag.TRACE, SpaceTag.TRACE, name="exterior value trace")


def _check_eps(name: str, value: float) -> None:
    if not np.isfinite(value) or value <= 0.0:
        raise ConfigurationError(f"{name} must be positive, got {value}")


def assemble_mass(mesh: SurfaceMesh) -> MassMatrix:
    """Exact P1 Gram matrix: area/12 * [[2, 1, 1], [1, 2, 1], [1, 1, 2]] per panel."""
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    values = mesh.areas[:, None, None] * local[None, :, :]
    rows = np.repeat(mesh.triangles[:, :, None], 3, axis=2)
    cols = np.repeat(mesh.triangles[:, None, :], 3, axis=1)
    matrix = sparse.coo_matrix(
        (values.ravel(), (rows.ravel(), cols.ravel())), shape=(mesh.n_vertices, mesh.n_vertices)
    ).tocsr()
    return MassMatrix(matrix)


@dataclass(frozen=True, eq=False)
class _RegularPoints:
    """Regular quadrature points of every panel, flattened panel-major."""

    points: npt.NDArray[np.float64]
    weights: npt.NDArray[np.float64]
    normals: npt.NDArray[np.float64]
    basis: sparse.csr_matrix
    per_panel: int


def _regular_points(mesh: SurfaceMesh, degree: int) -> _RegularPoints:
    rule = gauss_rule(degree)
    q = len(rule)
    n_panels = mesh.n_panels
    rows = np.repeat(mesh.triangles[:, None, :], q, axis=1)
    cols = np.repeat(np.arange(n_panels * q).reshape(n_panels, q, 1), 3, axis=2)
    values = np.broadcast_to(rule.points[None, :, :], (n_panels, q, 3))
    basis = sparse.csr_matrix(
        (values.ravel(), (rows.ravel(), cols.ravel())), shape=(mesh.n_vertices, n_panels * q)
    )
    return _RegularPoints(
        points=rule.map(mesh.panel_vertices).reshape(-1, 3),
        weights=(mesh.areas[:, None] * rule.weights[None, :]).ravel(),
        normals=np.repeat(mesh.normals, q, axis=0),
        basis=basis,
        per_panel=q,
    )


def _far_field_rows(
    mesh: SurfaceMesh, regular: _RegularPoints, first: int, last: int
) -> Tuple[npt.NDArray[np.int64], npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Regular-rule contributions of test panels first..last-1 against all non-touching panels.

    Returns the touched vertex rows with their single- and double-layer row
    blocks, and the panel-pair single-layer integrals of the chunk.
    """
    q = regular.per_panel
    rows = slice(first * q, last * q)
    x, wx = regular.points[rows], regular.weights[rows]
    y, wy, ny = regular.points, regular.weights, regular.normals

    squared = (x**2).sum(axis=1)[:, None] + (y**2).sum(axis=1)[None, :] - 2.0 * (x @ y.T)
    np.maximum(squared, 0.0, out=squared)
    touching = mesh.panel_adjacency[first:last].toarray() > 0
    touching = np.repeat(np.repeat(touching, q, axis=0), q, axis=1)
    with np.errstate(divide="ignore"):
        inv_r = 1.0 / np.sqrt(squared)
    inv_r[touching] = 0.0

    weight = wx[:, None] * wy[None, :] / FOUR_PI
    single = inv_r * weight
    double = ((y * ny).sum(axis=1)[None, :] - x @ ny.T) * inv_r**3 * weight

    n_rows = last - first
    panel_block = single.reshape(n_rows, q, mesh.n_panels, q).sum(axis=(1, 3))

    vertex_ids = np.unique(mesh.triangles[first:last])
    local_basis = regular.basis[vertex_ids][:, rows].toarray()
    single_rows = local_basis @ (regular.basis @ single.T).T
    double_rows = local_basis @ (regular.basis @ double.T).T
    return vertex_ids, single_rows, double_rows, panel_block


def _touching_pairs(mesh: SurfaceMesh) -> Dict[PanelConfiguration, Tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]]:
    """Panel pairs (t, s) with t <= s that share at least one vertex, by configuration."""
    upper = sparse.triu(mesh.panel_adjacency).tocoo()
    shared = np.rint(upper.data).astype(np.int64)
    pairs = {}
    for configuration in (
        PanelConfiguration.IDENTICAL,
        PanelConfiguration.SHARED_EDGE,
        PanelConfiguration.SHARED_VERTEX,
    ):
        selected = shared == configuration.shared_vertices
        pairs[configuration] = (upper.row[selected].astype(np.int64), upper.col[selected].astype(np.int64))
    return pairs


def align_pairs(
    triangles: npt.NDArray[np.int64], t: npt.NDArray[np.int64], s: npt.NDArray[np.int64]
) -> Tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
    """Local corner permutations moving shared vertices to the front in matching order."""
    tri_t, tri_s = triangles[t], triangles[s]
    equal = tri_t[:, :, None] == tri_s[:, None, :]
    perm_t = np.argsort(~equal.any(axis=2), axis=1, kind="stable")
    rank_t = np.argsort(perm_t, axis=1)
    matched = np.take_along_axis(rank_t, equal.argmax(axis=1), axis=1)
    key_s = np.where(equal.any(axis=1), matched, 3 + np.arange(3)[None, :])
    perm_s = np.argsort(key_s, axis=1, kind="stable")
    return perm_t, perm_s


def _local_matrix(kernel: npt.NDArray[np.float64], rule: PanelPairRule) -> npt.NDArray[np.float64]:
    return np.einsum("pm,ma,mb->pab", kernel, rule.points_x, rule.points_y)


def _singular_batch(
    mesh: SurfaceMesh,
    rule: PanelPairRule,
    t: npt.NDArray[np.int64],
    s: npt.NDArray[np.int64],
    perm_t: npt.NDArray[np.int64],
    perm_s: npt.NDArray[np.int64],
) -> Tuple[npt.NDArray[np.float64], ...]:
    corners_t = np.take_along_axis(mesh.panel_vertices[t], perm_t[:, :, None], axis=1)
    corners_s = np.take_along_axis(mesh.panel_vertices[s], perm_s[:, :, None], axis=1)
    x = np.einsum("mk,pkd->pmd", rule.points_x, corners_t)
    y = np.einsum("mk,pkd->pmd", rule.points_y, corners_s)
    d = y - x
    r = np.linalg.norm(d, axis=2)

    scale = (mesh.areas[t] * mesh.areas[s])[:, None] * rule.weights[None, :] / FOUR_PI
    green = scale / r
    # Kernel with the normal at the basis point, for both orderings of the pair.
    forward = scale * np.einsum("pmd,pd->pm", d, mesh.normals[s]) / r**3
    backward = -scale * np.einsum("pmd,pd->pm", d, mesh.normals[t]) / r**3
    return (
        _local_matrix(green, rule),
        _local_matrix(forward, rule),
        _local_matrix(backward, rule),
        green.sum(axis=1),
    )


def _batches(n: int, size: int) -> Iterator[slice]:
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def _ordered_map(pool: ThreadPoolExecutor, fn, items: List, window: int) -> Iterable:
    """pool.map with a bounded number of results in flight, yielding in submission order."""
    for start in range(0, len(items), window):
        yield from pool.map(fn, items[start : start + window])


def _add_singular_corrections(
    mesh: SurfaceMesh,
    order: int,
    pool: ThreadPoolExecutor,
    window: int,
    single: npt.NDArray[np.float64],
    double: npt.NDArray[np.float64],
    panel: npt.NDArray[np.float64],
) -> None:
    for configuration, (t, s) in _touching_pairs(mesh).items():
        if t.size == 0:
            continue
        rule = singular_pair_rule(configuration, order)
        perm_t, perm_s = align_pairs(mesh.triangles, t, s)
        ids_t = np.take_along_axis(mesh.triangles[t], perm_t, axis=1)
        ids_s = np.take_along_axis(mesh.triangles[s], perm_s, axis=1)
        logger.debug(f"{configuration.value}: {t.size} pairs, {len(rule)} points each")

        batches = list(_batches(t.size, _SINGULAR_BATCH))
        results = _ordered_map(
            pool, lambda b: _singular_batch(mesh, rule, t[b], s[b], perm_t[b], perm_s[b]), batches, window
        )
        for b, (local_single, forward, backward, pair_total) in zip(batches, results):
            rows, cols = ids_t[b][:, :, None], ids_s[b][:, None, :]
            if configuration is PanelConfiguration.IDENTICAL:
                # A flat panel sees no double-layer contribution from itself.
                np.add.at(single, (rows, cols), 0.5 * (local_single + local_single.transpose(0, 2, 1)))
                panel[t[b], s[b]] += pair_total
                continue
            np.add.at(single, (rows, cols), local_single)
            np.add.at(single, (ids_s[b][:, :, None], ids_t[b][:, None, :]), local_single.transpose(0, 2, 1))
            np.add.at(double, (rows, cols), forward)
            np.add.at(double, (ids_s[b][:, :, None], ids_t[b][:, None, :]), backward.transpose(0, 2, 1))
            panel[t[b], s[b]] += pair_total
            panel[s[b], t[b]] += pair_total


def surface_curls(mesh: SurfaceMesh) -> npt.NDArray[np.float64]:
    """n x grad of each local hat function, constant per panel; shape (F, 3, 3)."""
    p = mesh.panel_vertices
    return (np.roll(p, -1, axis=1) - np.roll(p, -2, axis=1)) / (2.0 * mesh.areas)[:, None, None]


def _hypersingular(mesh: SurfaceMesh, panel: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    curls = surface_curls(mesh)
    rows = np.repeat(np.arange(mesh.n_panels), 3)
    matrix = np.zeros((mesh.n_vertices, mesh.n_vertices))
    for c in range(3):
        curl = sparse.csr_matrix(
            (curls[:, :, c].ravel(), (rows, mesh.triangles.ravel())), shape=(mesh.n_panels, mesh.n_vertices)
        )
        matrix += curl.T @ (curl.T @ panel).T
    return 0.5 * (matrix + matrix.T)


@lru_cache(maxsize=4)
def _assemble_cached(mesh: SurfaceMesh, orders: QuadratureOrders, threads: int, chunk_panels: int) -> OperatorSet:
    n, n_panels = mesh.n_vertices, mesh.n_panels
    timings: Dict[str, float] = {}

    start = time.perf_counter()
    mass = assemble_mass(mesh)
    regular = _regular_points(mesh, orders.regular_degree)
    timings["mass"] = time.perf_counter() - start

    single = np.zeros((n, n))
    double = np.zeros((n, n))
    panel = np.zeros((n_panels, n_panels))
    window = 2 * threads

    with ThreadPoolExecutor(max_workers=threads) as pool:
        start = time.perf_counter()
        chunks = [(b.start, b.stop) for b in _batches(n_panels, chunk_panels)]
        results = _ordered_map(pool, lambda c: _far_field_rows(mesh, regular, *c), chunks, window)
        for (first, last), (vertex_ids, single_rows, double_rows, panel_block) in zip(chunks, results):
            single[vertex_ids] += single_rows
            double[vertex_ids] += double_rows
            panel[first:last] = panel_block
        timings["far_field"] = time.perf_counter() - start
        logger.debug(f"Far field done in {timings['far_field']:.2f}s ({len(chunks)} chunks)")

        start = time.perf_counter()
        _add_singular_corrections(mesh, orders.singular_order, pool, window, single, double, panel)
        timings["singular"] = time.perf_counter() - start

    start = time.perf_counter()
    hyper = _hypersingular(mesh, 0.5 * (panel + panel.T))
    timings["hypersingular"] = time.perf_counter() - start

    single = 0.5 * (single + single.T)
    operators = OperatorSet(
        mesh=mesh,
        mass=mass,
        single_layer=OperatorMatrix(single, SpaceTag.FLUX, SpaceTag.TRACE, symmetric=True, name="single layer"),
        double_layer=OperatorMatrix(double, SpaceTag.TRACE, SpaceTag.TRACE, name="double layer"),
        adjoint_double_layer=OperatorMatrix(
            -double.T, SpaceTag.FLUX, SpaceTag.FLUX, name="adjoint double layer"
        ),
        hypersingular=OperatorMatrix(hyper, SpaceTag.TRACE, SpaceTag.FLUX, symmetric=True, name="hypersingular"),
        orders=orders,
        timings=timings,
    )
    logger.info(f"Assembled boundary operators for N={n} in {sum(timings.values()):.2f}s")
    return operators


def assemble_all(
    mesh: SurfaceMesh,
    orders: Optional[QuadratureOrders] = None,
    threads: int = 1,
    chunk_panels: int = 4,
) -> OperatorSet:
    """Assemble M, S~, K^, K' and D~ in one pass; repeated calls reuse the result."""
    if threads < 1:
        raise ConfigurationError(f"threads must be at least 1, got {threads}")
    if chunk_panels < 1:
        raise ConfigurationError(f"chunk_panels must be at least 1, got {chunk_panels}")
    return _assemble_cached(mesh, orders or QuadratureOrders(), threads, chunk_panels)


def assemble_Vtilde(mesh: SurfaceMesh, orders: Optional[QuadratureOrders] = None, **kwargs) -> OperatorMatrix:
    """Single-layer Galerkin matrix S~ = gamma_0 U."""
    return assemble_all(mesh, orders, **kwargs).single_layer


def assemble_S(mesh: SurfaceMesh, eps1: float, orders: Optional[QuadratureOrders] = None, **kwargs) -> OperatorMatrix:
    _check_eps("eps1", eps1)
    return assemble_all(mesh, orders, **kwargs).S(eps1)


def assemble_D(mesh: SurfaceMesh, eps0: float, orders: Optional[QuadratureOrders] = None, **kwargs) -> OperatorMatrix:
    _check_eps("eps0", eps0)
    return assemble_all(mesh, orders, **kwargs).D(eps0)


def assemble_Dtilde(mesh: SurfaceMesh, orders: Optional[QuadratureOrders] = None, **kwargs) -> OperatorMatrix:
    """Hypersingular Galerkin matrix D~ = gamma_1 V; annihilates constants."""
    return assemble_all(mesh, orders, **kwargs).hypersingular


def save_operators(operators: Dict[str, OperatorMatrix], path: Union[str, Path]) -> None:
    """Write matrices as a JSON header line followed by row-major float64 blocks."""
    header = [
        {
            "name": name,
            "n": op.n,
            "domain": op.domain.value,
            "range": op.range.value,
            "symmetric": op.symmetric,
        }
        for name, op in operators.items()
    ]
    try:
        with open(path, "wb") as f:
            f.write(_OPERATOR_MAGIC)
            f.write(json.dumps(header).encode() + b"\n")
            for op in operators.values():
                f.write(np.ascontiguousarray(op.matrix, dtype="<f8").tobytes())
    except OSError as e:
        raise JumpBEMError(f"cannot write operators to {path}: {e}", EXIT_IO) from e


def load_operators(path: Union[str, Path]) -> Dict[str, OperatorMatrix]:
    """Read matrices written by `save_operators`."""
    try:
        with open(path, "rb") as f:
            if f.readline() != _OPERATOR_MAGIC:
                raise JumpBEMError(f"{path} is not an operator file", EXIT_IO)
            header = json.loads(f.readline())
            operators = {}
            for entry in header:
                n = entry["n"]
                raw = f.read(8 * n * n)
                if len(raw) != 8 * n * n:
                    raise JumpBEMError(f"{path} is truncated at operator {entry['name']!r}", EXIT_IO)
                operators[entry["name"]] = OperatorMatrix(
                    np.frombuffer(raw, dtype="<f8").reshape(n, n),
                    SpaceTag(entry["domain"]),
                    SpaceTag(entry["range"]),
                    symmetric=entry["symmetric"],
                    name=entry["name"],
                )
    except OSError as e:
        raise JumpBEMError(f"cannot read operators from {path}: {e}", EXIT_IO) from e
    return operators
