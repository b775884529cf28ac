"""Closed, oriented triangulated surfaces: generators, OFF exchange and statistics."""

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy import sparse

from .exceptions import EXIT_IO, MeshError

logger = logging.getLogger(__name__)

MAX_SUBDIVISIONS = 7

# Icosahedron with circumradius sqrt(1 + phi^2); rescaled onto the sphere below.
_PHI = (1.0 + np.sqrt(5.0)) / 2.0
_ICOSAHEDRON_VERTICES = np.array(
    [
        [-1.0, _PHI, 0.0],
        [1.0, _PHI, 0.0],
        [-1.0, -_PHI, 0.0],
        [1.0, -_PHI, 0.0],
        [0.0, -1.0, _PHI],
        [0.0, 1.0, _PHI],
        [0.0, -1.0, -_PHI],
        [0.0, 1.0, -_PHI],
        [_PHI, 0.0, -1.0],
        [_PHI, 0.0, 1.0],
        [-_PHI, 0.0, -1.0],
        [-_PHI, 0.0, 1.0],
    ]
)
_ICOSAHEDRON_TRIANGLES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [5, 4, 9], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
)

_CUBE_VERTICES = np.array(
    [[x, y, z] for z in (0.0, 1.0) for y in (0.0, 1.0) for x in (0.0, 1.0)]
)
_CUBE_TRIANGLES = np.array(
    [
        [0, 2, 3], [0, 3, 1],  # z = 0
        [4, 5, 7], [4, 7, 6],  # z = 1
        [0, 1, 5], [0, 5, 4],  # y = 0
        [2, 6, 7], [2, 7, 3],  # y = 1
        [0, 4, 6], [0, 6, 2],  # x = 0
        [1, 3, 7], [1, 7, 5],  # x = 1
    ]
)


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Closed oriented triangulation with outward, counterclockwise panels.

    Arrays are stored read-only; every derived quantity is computed once on
    first access and cached, so a mesh can be shared freely between workers.
    """

    vertices: npt.NDArray[np.float64]
    triangles: npt.NDArray[np.int64]

    def __post_init__(self) -> None:
        vertices = np.array(self.vertices, dtype=np.float64)
        triangles = np.array(self.triangles, dtype=np.int64)
        vertices.setflags(write=False)
        triangles.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_panels(self) -> int:
        return int(self.triangles.shape[0])

    @cached_property
    def panel_vertices(self) -> npt.NDArray[np.float64]:
        """Corner coordinates per panel, shape (F, 3, 3)."""
        return self.vertices[self.triangles]

    @cached_property
    def _doubled_normals(self) -> npt.NDArray[np.float64]:
        p = self.panel_vertices
        return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    @cached_property
    def areas(self) -> npt.NDArray[np.float64]:
        return 0.5 * np.linalg.norm(self._doubled_normals, axis=1)

    @cached_property
    def normals(self) -> npt.NDArray[np.float64]:
        return self._doubled_normals / (2.0 * self.areas[:, None])

    @cached_property
    def centroids(self) -> npt.NDArray[np.float64]:
        return self.panel_vertices.mean(axis=1)

    @cached_property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @cached_property
    def volume(self) -> float:
        """Enclosed volume by the divergence theorem; positive for outward normals."""
        p = self.panel_vertices
        return float(np.einsum("ij,ij->", p[:, 0], np.cross(p[:, 1], p[:, 2])) / 6.0)

    @cached_property
    def edges(self) -> npt.NDArray[np.int64]:
        """Unique undirected edges as sorted vertex pairs, shape (E, 2)."""
        pairs = self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        return np.unique(np.sort(pairs, axis=1), axis=0)

    @cached_property
    def h_max(self) -> float:
        e = self.edges
        return float(np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1).max())

    @cached_property
    def euler_characteristic(self) -> int:
        return self.n_vertices - int(self.edges.shape[0]) + self.n_panels

    @cached_property
    def incidence(self) -> sparse.csr_matrix:
        """Panel-to-vertex incidence, shape (F, N)."""
        rows = np.repeat(np.arange(self.n_panels), 3)
        data = np.ones(rows.size)
        return sparse.csr_matrix(
            (data, (rows, self.triangles.ravel())), shape=(self.n_panels, self.n_vertices)
        )

    @cached_property
    def panel_adjacency(self) -> sparse.csr_matrix:
        """Number of shared vertices for every touching panel pair, shape (F, F)."""
        adjacency = (self.incidence @ self.incidence.T).tocsr()
        adjacency.sort_indices()
        return adjacency

    @cached_property
    def centroid(self) -> npt.NDArray[np.float64]:
        """Volume centroid of the enclosed solid."""
        p = self.panel_vertices
        signed = np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])) / 6.0
        return (signed[:, None] * p.sum(axis=1) / 4.0).sum(axis=0) / signed.sum()


@dataclass(frozen=True)
class MeshStatistics:
    """Combinatorial and geometric summary of a mesh."""

    n_vertices: int
    n_panels: int
    h_max: float
    area: float
    volume: float
    euler_characteristic: int

    def dict(self) -> Dict:
        """Convert to dictionary."""
        return {
            "N": self.n_vertices,
            "F": self.n_panels,
            "h_max": self.h_max,
            "area": self.area,
            "volume": self.volume,
            "euler_characteristic": self.euler_characteristic,
        }


def mesh_statistics(mesh: SurfaceMesh) -> MeshStatistics:
    """Summarize a valid mesh."""
    return MeshStatistics(
        n_vertices=mesh.n_vertices,
        n_panels=mesh.n_panels,
        h_max=mesh.h_max,
        area=mesh.total_area,
        volume=mesh.volume,
        euler_characteristic=mesh.euler_characteristic,
    )


def _check_combinatorics(n_vertices: int, triangles: npt.NDArray[np.int64]) -> bool:
    """Check the closed 2-manifold conditions; return whether orientation is consistent."""
    if triangles.ndim != 2 or triangles.shape[1] != 3 or triangles.shape[0] == 0:
        raise MeshError("mesh must contain at least one triangle with 3 vertex indices")
    if triangles.min() < 0 or triangles.max() >= n_vertices:
        raise MeshError(f"vertex index out of range [0, {n_vertices - 1}]")
    t = np.sort(triangles, axis=1)
    degenerate = np.flatnonzero((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]))
    if degenerate.size:
        raise MeshError(f"triangle {degenerate[0]} repeats a vertex")
    unused = np.setdiff1d(np.arange(n_vertices), triangles.ravel())
    if unused.size:
        raise MeshError(f"vertex {unused[0]} is not used by any triangle")

    directed = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    undirected, counts = np.unique(np.sort(directed, axis=1), axis=0, return_counts=True)
    bad = np.flatnonzero(counts != 2)
    if bad.size:
        a, b = undirected[bad[0]]
        raise MeshError(
            f"manifold violation: edge ({a}, {b}) is used by {counts[bad[0]]} triangles"
        )
    _, directed_counts = np.unique(directed, axis=0, return_counts=True)
    return bool(np.all(directed_counts == 1))


def validate(mesh: SurfaceMesh) -> None:
    """Re-check every SurfaceMesh invariant; raises MeshError on the first breach."""
    if not _check_combinatorics(mesh.n_vertices, mesh.triangles):
        raise MeshError("inconsistent orientation: a directed edge is traversed twice")
    scale = mesh.h_max**2
    tiny = np.flatnonzero(mesh.areas <= 1e-14 * scale)
    if tiny.size:
        raise MeshError(f"zero-area panel {tiny[0]}")
    unit = np.abs(np.linalg.norm(mesh.normals, axis=1) - 1.0)
    if unit.max() > 1e-12:
        raise MeshError("panel normals are not unit length")
    if mesh.volume <= 0.0:
        raise MeshError("normals point inward (non-positive enclosed volume)")


def from_arrays(
    vertices: npt.ArrayLike,
    triangles: npt.ArrayLike,
    repair_orientation: bool = True,
) -> SurfaceMesh:
    """Build and validate a mesh, flipping all panels once if they point inward."""
    vertices = np.asarray(vertices, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshError("vertices must be an (N, 3) array")
    if not _check_combinatorics(vertices.shape[0], triangles):
        raise MeshError("mixed orientation: no single global flip makes the panels consistent")

    mesh = SurfaceMesh(vertices, triangles)
    if repair_orientation and mesh.volume < 0.0:
        logger.info("Flipping panel orientation to make normals point outward")
        mesh = SurfaceMesh(vertices, triangles[:, [0, 2, 1]])
    validate(mesh)
    return mesh


def _subdivide(
    vertices: npt.NDArray[np.float64], triangles: npt.NDArray[np.int64]
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.int64]]:
    """Split every triangle into four through its edge midpoints, keeping orientation."""
    corner_pairs = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 3, 2)
    edges, inverse = np.unique(
        np.sort(corner_pairs.reshape(-1, 2), axis=1), axis=0, return_inverse=True
    )
    midpoints = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    mid = vertices.shape[0] + inverse.reshape(-1, 3)
    a, b, c = triangles.T
    m01, m12, m20 = mid.T
    refined = np.concatenate(
        [
            np.stack([a, m01, m20], axis=1),
            np.stack([b, m12, m01], axis=1),
            np.stack([c, m20, m12], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ]
    )
    return np.vstack([vertices, midpoints]), refined


def make_icosphere(subdivisions: int, radius: float = 1.0) -> SurfaceMesh:
    """Subdivided icosahedron projected onto a sphere centered at the origin."""
    if not 0 <= subdivisions <= MAX_SUBDIVISIONS:
        raise MeshError(f"subdivisions must be in [0, {MAX_SUBDIVISIONS}], got {subdivisions}")
    if radius <= 0.0:
        raise MeshError(f"radius must be positive, got {radius}")

    vertices = _ICOSAHEDRON_VERTICES / np.linalg.norm(_ICOSAHEDRON_VERTICES, axis=1)[:, None]
    triangles = _ICOSAHEDRON_TRIANGLES
    for _ in range(subdivisions):
        vertices, triangles = _subdivide(vertices, triangles)
        vertices = vertices / np.linalg.norm(vertices, axis=1)[:, None]

    mesh = from_arrays(radius * vertices, triangles)
    logger.debug(f"Icosphere level {subdivisions}: {mesh.n_vertices} vertices, {mesh.n_panels} panels")
    return mesh


def make_cube(edge: float = 1.0) -> SurfaceMesh:
    """Axis-aligned cube [0, edge]^3 with two triangles per face."""
    return from_arrays(edge * _CUBE_VERTICES, _CUBE_TRIANGLES)


def _significant_lines(text: str) -> List[Tuple[int, List[str]]]:
    lines = []
    for number, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if tokens:
            lines.append((number, tokens))
    return lines


def load_off(path: Union[str, Path]) -> SurfaceMesh:
    """Read an ASCII OFF file of triangles and validate it.

    Line numbers in errors are 1-based file lines; vertex indices are 0-based.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise MeshError(f"cannot read {path}: {e}", exit_code=EXIT_IO) from e

    lines = _significant_lines(text)
    if not lines or not lines[0][1][0].upper().endswith("OFF"):
        raise MeshError("missing OFF header", line=lines[0][0] if lines else 1)

    header_line, header = lines[0]
    cursor = 1
    counts = header[1:]
    if not counts:
        if len(lines) < 2:
            raise MeshError("missing element counts", line=header_line)
        header_line, counts = lines[1]
        cursor = 2
    try:
        n_vertices, n_faces = int(counts[0]), int(counts[1])
    except (ValueError, IndexError) as e:
        raise MeshError("expected vertex and face counts", line=header_line) from e

    if len(lines) < cursor + n_vertices + n_faces:
        last = lines[-1][0] if lines else header_line
        raise MeshError(
            f"file ends early: expected {n_vertices} vertices and {n_faces} faces", line=last
        )

    vertices = np.empty((n_vertices, 3))
    for i in range(n_vertices):
        number, tokens = lines[cursor + i]
        if len(tokens) < 3:
            raise MeshError("vertex line needs 3 coordinates", line=number)
        try:
            vertices[i] = [float(v) for v in tokens[:3]]
        except ValueError as e:
            raise MeshError(f"bad vertex coordinates {tokens[:3]}", line=number) from e
    cursor += n_vertices

    triangles = np.empty((n_faces, 3), dtype=np.int64)
    for i in range(n_faces):
        number, tokens = lines[cursor + i]
        try:
            indices = [int(v) for v in tokens]
        except ValueError as e:
            raise MeshError(f"bad face indices {tokens}", line=number) from e
        if indices[0] != 3:
            raise MeshError(f"only triangular faces are supported, got {indices[0]}-gon", line=number)
        if len(indices) < 4:
            raise MeshError("face line needs 3 vertex indices", line=number)
        if min(indices[1:4]) < 0 or max(indices[1:4]) >= n_vertices:
            raise MeshError(f"face index out of range in {indices[1:4]}", line=number)
        triangles[i] = indices[1:4]

    mesh = from_arrays(vertices, triangles)
    logger.info(f"Loaded {path}: {mesh.n_vertices} vertices, {mesh.n_panels} panels")
    return mesh


def save_off(mesh: SurfaceMesh, path: Union[str, Path]) -> None:
    """Write an ASCII OFF file; 17 significant digits reproduce coordinates bit-exactly."""
    path = Path(path)
    out = [
        "OFF",
        f"{mesh.n_vertices} {mesh.n_panels} {int(mesh.edges.shape[0])}",
    ]
    out.extend(" ".join(f"{c:.17g}" for c in v) for v in mesh.vertices)
    out.extend(f"3 {a} {b} {c}" for a, b, c in mesh.triangles)
    try:
        path.write_text("\n".join(out) + "\n")
    except OSError as e:
        raise MeshError(f"cannot write {path}: {e}", exit_code=EXIT_IO) from e
