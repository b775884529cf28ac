"""Quadrature over triangles and triangle pairs.

Barycentric points are ordered against the panel corners (v0, v1, v2). Pair
rules work on the reference triangle {0 <= r2 <= r1 <= 1} mapped as
x = (1 - r1) v0 + (r1 - r2) v1 + r2 v2, so the shared edge of an edge-adjacent
pair is v0 -> v1 on both panels and the shared vertex of a vertex-adjacent
pair is v0 on both panels.

All weights are normalized to sum to one: the physical integral is the
weighted sum times the panel area (times both areas for pair rules).
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, List, Tuple

import numpy as np
import numpy.typing as npt
from scipy.special import roots_jacobi, roots_legendre

from .exceptions import QuadratureError

logger = logging.getLogger(__name__)

MAX_DEGREE = 20
FOUR_PI = 4.0 * np.pi


class PanelConfiguration(str, Enum):
    """How two panels of a mesh touch."""

    IDENTICAL = "identical"
    SHARED_EDGE = "shared-edge"
    SHARED_VERTEX = "shared-vertex"
    DISJOINT = "disjoint"

    @property
    def shared_vertices(self) -> int:
        return _SHARED_VERTICES[self]

    @classmethod
    def from_shared_count(cls, shared: int) -> "PanelConfiguration":
        for configuration, count in _SHARED_VERTICES.items():
            if count == shared:
                return configuration
        raise QuadratureError(f"panels cannot share {shared} vertices")


_SHARED_VERTICES = {
    PanelConfiguration.IDENTICAL: 3,
    PanelConfiguration.SHARED_EDGE: 2,
    PanelConfiguration.SHARED_VERTEX: 1,
    PanelConfiguration.DISJOINT: 0,
}


@dataclass(frozen=True)
class TriangleRule:
    """Barycentric points and normalized weights exact to `degree`."""

    points: npt.NDArray[np.float64]
    weights: npt.NDArray[np.float64]
    degree: int

    def __len__(self) -> int:
        return int(self.weights.size)

    def map(self, corners: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        """Physical points for corners of shape (..., 3, 3); result (..., m, 3)."""
        return np.einsum("mk,...kd->...md", self.points, corners)


@dataclass(frozen=True)
class PanelPairRule:
    """Paired barycentric points with normalized weights for a 4D panel-pair integral."""

    configuration: PanelConfiguration
    points_x: npt.NDArray[np.float64]
    points_y: npt.NDArray[np.float64]
    weights: npt.NDArray[np.float64]
    order: int

    def __len__(self) -> int:
        return int(self.weights.size)


def _orbit_3(weight: float) -> Tuple[List[List[float]], List[float]]:
    return [[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]], [weight]


def _orbit_21(a: float, weight: float) -> Tuple[List[List[float]], List[float]]:
    b = 1.0 - 2.0 * a
    return [[a, a, b], [a, b, a], [b, a, a]], [weight] * 3


def _orbit_111(a: float, b: float, weight: float) -> Tuple[List[List[float]], List[float]]:
    c = 1.0 - a - b
    points = [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
    return points, [weight] * 6


def _symmetric_rule(orbits: List[Tuple[List[List[float]], List[float]]], degree: int) -> TriangleRule:
    points = np.array([p for orbit in orbits for p in orbit[0]])
    weights = np.array([w for orbit in orbits for w in orbit[1]])
    return TriangleRule(points=points, weights=weights / weights.sum(), degree=degree)


_SQRT15 = np.sqrt(15.0)

# Fully symmetric positive-weight rules (Dunavant family) for the low degrees used in assembly.
_SYMMETRIC_RULES: dict = {
    1: lambda: _symmetric_rule([_orbit_3(1.0)], 1),
    2: lambda: _symmetric_rule([_orbit_21(1.0 / 6.0, 1.0 / 3.0)], 2),
    4: lambda: _symmetric_rule(
        [
            _orbit_21(0.445948490915965, 0.223381589678011),
            _orbit_21(0.091576213509771, 0.109951743655322),
        ],
        4,
    ),
    5: lambda: _symmetric_rule(
        [
            _orbit_3(0.225),
            _orbit_21((6.0 - _SQRT15) / 21.0, (155.0 - _SQRT15) / 1200.0),
            _orbit_21((6.0 + _SQRT15) / 21.0, (155.0 + _SQRT15) / 1200.0),
        ],
        5,
    ),
    6: lambda: _symmetric_rule(
        [
            _orbit_21(0.249286745170910, 0.116786275726379),
            _orbit_21(0.063089014491502, 0.050844906370207),
            _orbit_111(0.053145049844817, 0.310352451033784, 0.082851075618374),
        ],
        6,
    ),
}
_SYMMETRIC_RULES[3] = _SYMMETRIC_RULES[4]


def gauss_legendre_01(n: int) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = roots_legendre(n)
    return (x + 1.0) / 2.0, w / 2.0


def _collapsed_rule(degree: int) -> TriangleRule:
    """Conical (Stroud) product of Gauss-Jacobi and Gauss-Legendre rules."""
    n = (degree + 2) // 2
    x00, w00 = roots_legendre(n)
    x01, w01 = roots_jacobi(n, 1, 0)
    s = (x01 + 1.0) / 2.0
    t = (x00 + 1.0) / 2.0
    xi = np.repeat(s, n)
    eta = np.outer(1.0 - s, t).ravel()
    weights = np.outer(w01, w00).ravel() / 4.0
    points = np.stack([1.0 - xi - eta, xi, eta], axis=1)
    return TriangleRule(points=points, weights=weights / weights.sum(), degree=degree)


@lru_cache(maxsize=None)
def gauss_rule(degree: int) -> TriangleRule:
    """Triangle rule exact for polynomials up to `degree` (1 <= degree <= 20).

    A request may be served by a higher-degree rule, so the returned `degree`
    can exceed the request; the rule is exact to it. Degree 3 gets the
    degree-4 rule.
    """
    if not 1 <= degree <= MAX_DEGREE:
        raise QuadratureError(f"unsupported triangle rule degree {degree}; use 1..{MAX_DEGREE}")
    if degree in _SYMMETRIC_RULES:
        return _SYMMETRIC_RULES[degree]()
    return _collapsed_rule(degree)


_Coordinates = Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]
_Region = Callable[
    [npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.float64]],
    Tuple[_Coordinates, _Coordinates, npt.NDArray[np.float64]],
]


def _identical_regions() -> List[_Region]:
    def r1(xi, e1, e2, e3):
        return (xi, xi * (1 - e1 + e1 * e2)), (xi * (1 - e1 * e2 * e3), xi * (1 - e1)), xi**3 * e1**2 * e2

    def r3(xi, e1, e2, e3):
        return (
            (xi, xi * e1 * (1 - e2 + e2 * e3)),
            (xi * (1 - e1 * e2), xi * e1 * (1 - e2)),
            xi**3 * e1**2 * e2,
        )

    def r5(xi, e1, e2, e3):
        return (
            (xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)),
            (xi, xi * e1 * (1 - e2)),
            xi**3 * e1**2 * e2,
        )

    return _with_swaps([r1, r3, r5])


def _shared_edge_regions() -> List[_Region]:
    def r1(xi, e1, e2, e3):
        return (xi, xi * e1 * e3), (xi * (1 - e1 * e2), xi * e1 * (1 - e2)), xi**3 * e1**2

    def r2(xi, e1, e2, e3):
        return (xi, xi * e1), (xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3)), xi**3 * e1**2 * e2

    def r3(xi, e1, e2, e3):
        return (xi * (1 - e1 * e2), xi * e1 * (1 - e2)), (xi, xi * e1 * e2 * e3), xi**3 * e1**2 * e2

    def r4(xi, e1, e2, e3):
        return (xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3)), (xi, xi * e1), xi**3 * e1**2 * e2

    def r5(xi, e1, e2, e3):
        return (xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)), (xi, xi * e1 * e2), xi**3 * e1**2 * e2

    return [r1, r2, r3, r4, r5]


def _shared_vertex_regions() -> List[_Region]:
    def r1(xi, e1, e2, e3):
        return (xi, xi * e1), (xi * e2, xi * e2 * e3), xi**3 * e2

    return _with_swaps([r1])


def _with_swaps(regions: List[_Region]) -> List[_Region]:
    def swapped(region: _Region) -> _Region:
        def inner(xi, e1, e2, e3):
            x, y, jac = region(xi, e1, e2, e3)
            return y, x, jac

        return inner

    out: List[_Region] = []
    for region in regions:
        out.extend([region, swapped(region)])
    return out


def _reference_to_barycentric(r1: npt.NDArray[np.float64], r2: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    return np.stack([1.0 - r1, r1 - r2, r2], axis=1)


_REGIONS = {
    PanelConfiguration.IDENTICAL: _identical_regions,
    PanelConfiguration.SHARED_EDGE: _shared_edge_regions,
    PanelConfiguration.SHARED_VERTEX: _shared_vertex_regions,
}


@lru_cache(maxsize=None)
def singular_pair_rule(configuration: PanelConfiguration, order: int) -> PanelPairRule:
    """Regularizing (Sauter-Schwab) rule for kernels singular where the panels touch.

    `order` is the number of Gauss-Legendre points per cube direction; for the
    disjoint configuration it is the degree of the two tensorized triangle rules.
    """
    configuration = PanelConfiguration(configuration)
    if order < 1:
        raise QuadratureError(f"order must be positive, got {order}")

    if configuration is PanelConfiguration.DISJOINT:
        rule = gauss_rule(min(order, MAX_DEGREE))
        m = len(rule)
        return PanelPairRule(
            configuration=configuration,
            points_x=np.repeat(rule.points, m, axis=0),
            points_y=np.tile(rule.points, (m, 1)),
            weights=np.outer(rule.weights, rule.weights).ravel(),
            order=order,
        )

    t, w = gauss_legendre_01(order)
    grid = np.meshgrid(t, t, t, t, indexing="ij")
    xi, e1, e2, e3 = (g.ravel() for g in grid)
    cube_weights = np.einsum("i,j,k,l->ijkl", w, w, w, w).ravel()

    points_x, points_y, weights = [], [], []
    for region in _REGIONS[configuration]():
        (x1, x2), (y1, y2), jac = region(xi, e1, e2, e3)
        points_x.append(_reference_to_barycentric(x1, x2))
        points_y.append(_reference_to_barycentric(y1, y2))
        # Each reference triangle has area 1/2, hence the factor 4.
        weights.append(4.0 * cube_weights * jac)

    return PanelPairRule(
        configuration=configuration,
        points_x=np.concatenate(points_x),
        points_y=np.concatenate(points_y),
        weights=np.concatenate(weights),
        order=order,
    )


def _log_sum(
    r: npt.NDArray[np.float64], l: npt.NDArray[np.float64], r0_sq: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    """log(R + l) without cancellation when l is close to -R."""
    with np.errstate(divide="ignore", invalid="ignore"):
        stable = np.where(l >= 0.0, r + l, r0_sq / (r - l))
        return np.log(stable)


def analytic_single_layer_panel(point: npt.ArrayLike, triangle: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Closed-form (1/4pi) * integral of 1/|x - y| over a flat triangle.

    Valid on, near and far from the panel. `point` may hold several points
    along its leading axes; the result drops the trailing coordinate axis.
    """
    corners = np.asarray(triangle, dtype=np.float64).reshape(3, 3)
    x = np.asarray(point, dtype=np.float64)
    flat = x.reshape(-1, 3)

    edges = np.roll(corners, -1, axis=0) - corners
    lengths = np.linalg.norm(edges, axis=1)
    doubled = np.cross(edges[0], corners[2] - corners[0])
    if np.linalg.norm(doubled) <= 1e-14 * lengths.max() ** 2:
        raise QuadratureError("degenerate triangle")
    n = doubled / np.linalg.norm(doubled)

    h = (flat - corners[0]) @ n
    abs_h = np.abs(h)
    total = np.zeros(flat.shape[0])
    for i in range(3):
        a, b = corners[i], corners[(i + 1) % 3]
        s = edges[i] / lengths[i]
        m = np.cross(s, n)
        p0 = (a - flat) @ m
        l_minus = (a - flat) @ s
        l_plus = (b - flat) @ s
        r0_sq = p0**2 + h**2
        r_minus = np.linalg.norm(flat - a, axis=1)
        r_plus = np.linalg.norm(flat - b, axis=1)

        on_line = np.abs(p0) <= 1e-14 * lengths.max()
        log_term = np.where(
            on_line, 0.0, p0 * (_log_sum(r_plus, l_plus, r0_sq) - _log_sum(r_minus, l_minus, r0_sq))
        )
        angle_term = np.arctan2(p0 * l_plus, r0_sq + abs_h * r_plus) - np.arctan2(
            p0 * l_minus, r0_sq + abs_h * r_minus
        )
        total += log_term - abs_h * angle_term

    return (total / FOUR_PI).reshape(x.shape[:-1])
