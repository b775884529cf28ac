"""Off-surface evaluation of the single layer U, double layer V and w = U sigma + V q."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import List

import numpy as np
import numpy.typing as npt

from .exceptions import GuardDistanceError, SpaceMismatchError
from .mesh import SurfaceMesh
from .quadrature import FOUR_PI, MAX_DEGREE, TriangleRule, gauss_rule
from .spaces import CoefficientVector, SpaceTag

logger = logging.getLogger(__name__)

DEFAULT_GUARD_FACTOR = 0.05
# Panels closer than this many diameters get the finest triangle rule.
NEAR_FIELD_DIAMETERS = 2.0
_POINT_CHUNK = 32

# Fixed irrational-looking directions tried in turn when a ray grazes an edge.
_RAY_DIRECTIONS = np.array(
    [
        [0.5773502691896258, 0.5345224838248488, 0.6172133998483676],
        [-0.3713906763541037, 0.7427813527082074, 0.5570860145311556],
        [0.2672612419124244, -0.5345224838248488, 0.8017837257372732],
        [0.8164965809277261, 0.4082482904638631, -0.4082482904638631],
        [-0.6030226891555273, -0.3015113445777637, -0.7385489458759964],
    ]
)


class Side(str, Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"


@dataclass(frozen=True, eq=False)
class EvaluationSet:
    """Points off the surface with their side and distance to the mesh."""

    points: npt.NDArray[np.float64]
    interior: npt.NDArray[np.bool_]
    distances: npt.NDArray[np.float64]

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def sides(self) -> List[Side]:
        return [Side.INTERIOR if inside else Side.EXTERIOR for inside in self.interior]

    def subset(self, mask: npt.NDArray[np.bool_]) -> "EvaluationSet":
        return EvaluationSet(self.points[mask], self.interior[mask], self.distances[mask])


def point_triangle_distance(points: npt.ArrayLike, corners: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Euclidean distances between points (P, 3) and triangles (F, 3, 3); shape (P, F)."""
    p = np.asarray(points, dtype=np.float64)[:, None, :]
    tri = np.asarray(corners, dtype=np.float64)[None, :, :, :]
    a, b, c = tri[..., 0, :], tri[..., 1, :], tri[..., 2, :]
    ab, ac = b - a, c - a
    ap, bp, cp = p - a, p - b, p - c

    def dot(u, v):
        return np.einsum("...d,...d->...", u, v)

    d1, d2 = dot(ab, ap), dot(ac, ap)
    d3, d4 = dot(ab, bp), dot(ac, bp)
    d5, d6 = dot(ab, cp), dot(ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        closest = a + ab * v[..., None] + ac * w[..., None]

        # Voronoi regions, lowest precedence first.
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        on_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        closest = np.where(on_bc[..., None], b + (c - b) * t_bc[..., None], closest)
        t_ac = d2 / (d2 - d6)
        on_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        closest = np.where(on_ac[..., None], a + ac * t_ac[..., None], closest)
        closest = np.where(((d6 >= 0) & (d5 <= d6))[..., None], c, closest)
        t_ab = d1 / (d1 - d3)
        on_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        closest = np.where(on_ab[..., None], a + ab * t_ab[..., None], closest)
        closest = np.where(((d3 >= 0) & (d4 <= d3))[..., None], b, closest)
        closest = np.where(((d1 <= 0) & (d2 <= 0))[..., None], a, closest)

    return np.linalg.norm(p - closest, axis=-1)


def distance_to_mesh(mesh: SurfaceMesh, points: npt.ArrayLike) -> npt.NDArray[np.float64]:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    out = np.empty(points.shape[0])
    for start in range(0, points.shape[0], _POINT_CHUNK):
        chunk = slice(start, start + _POINT_CHUNK)
        out[chunk] = point_triangle_distance(points[chunk], mesh.panel_vertices).min(axis=1)
    return out


def _ray_crossings(mesh: SurfaceMesh, origin: npt.NDArray[np.float64], direction: npt.NDArray[np.float64]):
    """Moller-Trumbore crossing count of a ray; None when the ray grazes an edge or vertex."""
    p = mesh.panel_vertices
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    h = np.cross(direction, e2)
    det = np.einsum("fd,fd->f", e1, h)
    scale = np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
    parallel = np.abs(det) <= 1e-12 * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / det
        s = origin - p[:, 0]
        u = np.einsum("fd,fd->f", s, h) * inv
        qv = np.cross(s, e1)
        v = (qv @ direction) * inv
        t = np.einsum("fd,fd->f", e2, qv) * inv

    eps = 1e-9
    ahead = ~parallel & (t > eps)
    inside = (u > eps) & (v > eps) & (u + v < 1.0 - eps)
    near_boundary = (u > -eps) & (v > -eps) & (u + v < 1.0 + eps) & ~inside
    if np.any(ahead & near_boundary):
        return None
    return int(np.count_nonzero(ahead & inside))


def classify_sides(mesh: SurfaceMesh, points: npt.ArrayLike) -> npt.NDArray[np.bool_]:
    """True for points inside the surface, by ray-crossing parity."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    interior = np.zeros(points.shape[0], dtype=bool)
    for i, point in enumerate(points):
        for direction in _RAY_DIRECTIONS:
            crossings = _ray_crossings(mesh, point, direction)
            if crossings is not None:
                interior[i] = crossings % 2 == 1
                break
        else:
            raise GuardDistanceError(f"cannot classify point {point.tolist()}: every ray grazes the mesh")
    return interior


def make_evaluation_set(
    mesh: SurfaceMesh, points: npt.ArrayLike, guard_factor: float = DEFAULT_GUARD_FACTOR
) -> EvaluationSet:
    """Classify points and refuse any closer to the surface than guard_factor * h_max."""
    points = np.atleast_2d(np.array(points, dtype=np.float64))
    distances = distance_to_mesh(mesh, points)
    guard = guard_factor * mesh.h_max
    if points.shape[0] and distances.min() < guard:
        worst = int(distances.argmin())
        raise GuardDistanceError(
            f"point {points[worst].tolist()} is {distances[worst]:.3e} from the surface "
            f"(guard {guard:.3e})",
            distance=float(distances[worst]),
        )
    return EvaluationSet(points=points, interior=classify_sides(mesh, points), distances=distances)


def _layer_values(
    mesh: SurfaceMesh,
    density: npt.NDArray[np.float64],
    points: npt.NDArray[np.float64],
    double: bool,
    rule: TriangleRule,
    near_rule: TriangleRule,
) -> npt.NDArray[np.float64]:
    corners = mesh.panel_vertices
    normals = mesh.normals

    def kernel(x, y, n):
        d = y - x
        r = np.linalg.norm(d, axis=-1)
        if double:
            return np.einsum("...d,...d->...", d, n) / (FOUR_PI * r**3)
        return 1.0 / (FOUR_PI * r)

    def panel_sums(x, r: TriangleRule, panels):
        # x (P, 3) against the listed panels, weights times interpolated density.
        y = r.map(corners[panels])
        values = r.points @ density[mesh.triangles[panels]].T
        weights = mesh.areas[panels][:, None] * r.weights[None, :] * values.T
        values = kernel(x[:, None, None, :], y[None], normals[panels][None, :, None, :])
        return (values * weights[None]).sum(axis=2)

    panels = np.arange(mesh.n_panels)
    totals = panel_sums(points, rule, panels)

    diameters = np.linalg.norm(corners - np.roll(corners, 1, axis=1), axis=2).max(axis=1)
    distances = point_triangle_distance(points, corners)
    near_point, near_panel = np.nonzero(distances < NEAR_FIELD_DIAMETERS * diameters[None, :])
    for i in np.unique(near_point):
        listed = near_panel[near_point == i]
        totals[i, listed] = panel_sums(points[i : i + 1], near_rule, listed)[0]
    return totals.sum(axis=1)


def _evaluate(
    mesh: SurfaceMesh,
    coefficients: CoefficientVector,
    pts: EvaluationSet,
    double: bool,
    degree: int,
    threads: int,
) -> npt.NDArray[np.float64]:
    if len(coefficients) != mesh.n_vertices:
        raise SpaceMismatchError(f"density has {len(coefficients)} entries for {mesh.n_vertices} vertices")
    rule, near_rule = gauss_rule(degree), gauss_rule(MAX_DEGREE)
    starts = list(range(0, len(pts), _POINT_CHUNK))

    def run(start: int) -> npt.NDArray[np.float64]:
        chunk = pts.points[start : start + _POINT_CHUNK]
        return _layer_values(mesh, coefficients.values, chunk, double, rule, near_rule)

    if not starts:
        return np.zeros(0)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return np.concatenate(list(pool.map(run, starts)))


def eval_single_layer(
    mesh: SurfaceMesh, sigma: CoefficientVector, pts: EvaluationSet, degree: int = 6, threads: int = 1
) -> npt.NDArray[np.float64]:
    """(U sigma)(x) = 1/(4 pi) int sigma(y) / |x - y| dy."""
    if sigma.space is not SpaceTag.FLUX:
        raise SpaceMismatchError(f"single layer density must be flux coefficients, got {sigma.space.value}")
    return _evaluate(mesh, sigma, pts, False, degree, threads)


def eval_double_layer(
    mesh: SurfaceMesh, q: CoefficientVector, pts: EvaluationSet, degree: int = 6, threads: int = 1
) -> npt.NDArray[np.float64]:
    """(V q)(x) = -1/(4 pi) int q(y) d/dn_y (1 / |x - y|) dy; equals 1 inside for q = 1."""
    if q.space is not SpaceTag.TRACE:
        raise SpaceMismatchError(f"double layer density must be trace coefficients, got {q.space.value}")
    return _evaluate(mesh, q, pts, True, degree, threads)


def eval_solution(
    mesh: SurfaceMesh,
    sigma: CoefficientVector,
    q: CoefficientVector,
    pts: EvaluationSet,
    degree: int = 6,
    threads: int = 1,
) -> npt.NDArray[np.float64]:
    """w = U sigma + V q."""
    return eval_single_layer(mesh, sigma, pts, degree, threads) + eval_double_layer(mesh, q, pts, degree, threads)
