"""Space-tagged vectors and matrices for the piecewise-linear surface space.

Densities live as nodal coefficients (`CoefficientVector`), data functionals as
their moments against the nodal basis (`DualVector`). Both carry a role tag:
FLUX for normal-derivative-like quantities (sigma, f1, g1, p1) and TRACE for
boundary-value-like quantities (q, f0, g0, p0). Operator products check tags.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Tuple, TypeVar, Union

import numpy as np
import numpy.typing as npt
from scipy import sparse
from scipy.sparse.linalg import splu

from .exceptions import SpaceMismatchError

logger = logging.getLogger(__name__)


class SpaceTag(str, Enum):
    FLUX = "flux"
    TRACE = "trace"


def _readonly(values: npt.ArrayLike) -> npt.NDArray[np.float64]:
    array = np.array(values, dtype=np.float64)
    if array.ndim != 1:
        raise ValueError(f"expected a 1-D array, got shape {array.shape}")
    array.setflags(write=False)
    return array


_V = TypeVar("_V", "CoefficientVector", "DualVector")


class _TaggedVector:
    """Arithmetic shared by coefficient and dual vectors; tags must agree."""

    space: SpaceTag

    @property
    def data(self) -> npt.NDArray[np.float64]:
        raise NotImplementedError

    def _like(self: _V, values: npt.NDArray[np.float64]) -> _V:
        raise NotImplementedError

    def _check(self, other: "_TaggedVector") -> None:
        if type(other) is not type(self) or other.space is not self.space:
            raise SpaceMismatchError(
                f"cannot combine {type(self).__name__}[{self.space.value}] "
                f"with {type(other).__name__}[{getattr(other, 'space', '?')}]"
            )

    def __len__(self) -> int:
        return int(self.data.size)

    def __add__(self, other):
        self._check(other)
        return self._like(self.data + other.data)

    def __sub__(self, other):
        self._check(other)
        return self._like(self.data - other.data)

    def __neg__(self):
        return self._like(-self.data)

    def __mul__(self, scalar: float):
        if not np.isscalar(scalar):
            return NotImplemented
        return self._like(float(scalar) * self.data)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))


@dataclass(frozen=True, eq=False)
class CoefficientVector(_TaggedVector):
    """Nodal coefficients of a continuous piecewise-linear surface function."""

    values: npt.NDArray[np.float64]
    space: SpaceTag
    mean_zero: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _readonly(self.values))
        object.__setattr__(self, "space", SpaceTag(self.space))

    @property
    def data(self) -> npt.NDArray[np.float64]:
        return self.values

    def _like(self, values: npt.NDArray[np.float64]) -> "CoefficientVector":
        return CoefficientVector(values, self.space)

    @classmethod
    def constant(cls, n: int, value: float, space: SpaceTag) -> "CoefficientVector":
        return cls(np.full(n, float(value)), space)


@dataclass(frozen=True, eq=False)
class DualVector(_TaggedVector):
    """Moments of a surface functional against the nodal basis."""

    moments: npt.NDArray[np.float64]
    space: SpaceTag

    def __post_init__(self) -> None:
        object.__setattr__(self, "moments", _readonly(self.moments))
        object.__setattr__(self, "space", SpaceTag(self.space))

    @property
    def data(self) -> npt.NDArray[np.float64]:
        return self.moments

    def _like(self, values: npt.NDArray[np.float64]) -> "DualVector":
        return DualVector(values, self.space)

    @classmethod
    def zeros(cls, n: int, space: SpaceTag) -> "DualVector":
        return cls(np.zeros(n), space)

    def total(self) -> float:
        """Pairing with the constant function 1."""
        return float(self.moments.sum())


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense Galerkin matrix mapping `domain` coefficients to `range` duals."""

    matrix: npt.NDArray[np.float64]
    domain: SpaceTag
    range: SpaceTag
    symmetric: bool = False
    name: str = ""

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {matrix.shape}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "domain", SpaceTag(self.domain))
        object.__setattr__(self, "range", SpaceTag(self.range))

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def scale(self) -> float:
        return float(np.abs(self.matrix).max()) if self.matrix.size else 0.0

    @property
    def symmetry_defect(self) -> float:
        """max|A - A^T| relative to max|A|."""
        scale = self.scale
        if scale == 0.0:
            return 0.0
        return float(np.abs(self.matrix - self.matrix.T).max() / scale)

    def __matmul__(self, vector: CoefficientVector) -> DualVector:
        if not isinstance(vector, CoefficientVector):
            raise SpaceMismatchError(
                f"{self.name or 'operator'} applies to coefficient vectors, got {type(vector).__name__}"
            )
        if vector.space is not self.domain:
            raise SpaceMismatchError(
                f"{self.name or 'operator'} expects {self.domain.value} coefficients, "
                f"got {vector.space.value}"
            )
        return DualVector(self.matrix @ vector.values, self.range)


@dataclass(frozen=True, eq=False)
class MassMatrix:
    """Sparse Gram matrix of the nodal hat functions; preserves space tags."""

    matrix: sparse.csr_matrix

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @cached_property
    def ones(self) -> npt.NDArray[np.float64]:
        """M 1, the moments of the constant function."""
        values = np.asarray(self.matrix.sum(axis=1)).ravel()
        values.setflags(write=False)
        return values

    @cached_property
    def area(self) -> float:
        return float(self.ones.sum())

    @cached_property
    def _factor(self):
        return splu(sparse.csc_matrix(self.matrix))

    @cached_property
    def dense(self) -> npt.NDArray[np.float64]:
        return self.matrix.toarray()

    def __matmul__(self, vector: CoefficientVector) -> DualVector:
        if not isinstance(vector, CoefficientVector):
            raise SpaceMismatchError(f"mass matrix applies to coefficient vectors, got {type(vector).__name__}")
        return DualVector(self.matrix @ vector.values, vector.space)

    def solve(self, dual: DualVector) -> CoefficientVector:
        """Coefficients whose moments are `dual` (the Riesz map)."""
        return CoefficientVector(self._factor.solve(np.array(dual.moments)), dual.space)

    def as_operator(self, space: SpaceTag) -> OperatorMatrix:
        return OperatorMatrix(self.dense, space, space, symmetric=True, name="mass")

    def mean(self, vector: CoefficientVector) -> float:
        return float(self.ones @ vector.values / self.area)

    def dual_norm(self, dual: DualVector) -> float:
        """sqrt(g^T M^-1 g); for c M1 this is |c| sqrt(area)."""
        return float(np.sqrt(max(dual.moments @ self.solve(dual).values, 0.0)))


Vector = Union[CoefficientVector, DualVector]


def project_mean_zero(vector: Vector, mass: MassMatrix) -> Tuple[Vector, float]:
    """Remove the constant part of a vector and return it.

    Coefficients lose their M-weighted mean. Trace duals lose a multiple of
    M 1 and flux duals a multiple of 1; both leave zero total moment. The
    removed multiple is returned as the diagnostic.
    """
    if len(vector) != mass.n:
        raise SpaceMismatchError(f"vector of length {len(vector)} against mass matrix of size {mass.n}")

    if isinstance(vector, CoefficientVector):
        constant = mass.mean(vector)
        return CoefficientVector(vector.values - constant, vector.space, mean_zero=True), constant

    if vector.space is SpaceTag.TRACE:
        constant = vector.total() / mass.area
        return DualVector(vector.moments - constant * mass.ones, vector.space), constant

    constant = vector.total() / mass.n
    return DualVector(vector.moments - constant, vector.space), constant
