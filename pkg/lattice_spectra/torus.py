"""Exact arithmetic on the torus T³ = (−π, π]³ and uniform momentum grids.

Points are plain ``numpy`` arrays whose last axis has length 3; every helper
broadcasts over leading axes, so a whole grid can be reduced in one call.
"""
import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Final, Tuple

import numpy as np
import numpy.typing as npt

from lattice_spectra.config import NUMERICAL_SETTINGS
from lattice_spectra.exceptions import InvalidResolutionError

logger = logging.getLogger(__name__)

TWO_PI: Final[float] = 2.0 * np.pi

TorusPoint = npt.NDArray[np.float64]


def normalize(x: npt.ArrayLike) -> TorusPoint:
    """Reduce coordinates modulo 2π into (−π, π].

    Values within ``snap_tol`` of −π are snapped to +π so that a point on the
    boundary always has a single representative.

    Args:
        x: Array of coordinates (any shape).

    Returns:
        TorusPoint: Reduced coordinates with the same shape as ``x``.
    """
    values = np.asarray(x, dtype=float)
    reduced = np.mod(values + np.pi, TWO_PI) - np.pi
    return np.where(reduced <= -np.pi + NUMERICAL_SETTINGS["snap_tol"], np.pi, reduced)


def as_point(x: npt.ArrayLike) -> TorusPoint:
    """Validate the shape of ``x`` and reduce it onto the torus."""
    point = np.asarray(x, dtype=float)
    if point.shape[-1:] != (3,):
        raise ValueError(f"torus points need 3 coordinates, got shape {point.shape}")
    return normalize(point)


def torus_add(a: npt.ArrayLike, b: npt.ArrayLike) -> TorusPoint:
    """Componentwise sum reduced into (−π, π]."""
    return normalize(np.asarray(a, dtype=float) + np.asarray(b, dtype=float))


def torus_sub(a: npt.ArrayLike, b: npt.ArrayLike) -> TorusPoint:
    return normalize(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))


def torus_neg(a: npt.ArrayLike) -> TorusPoint:
    return normalize(-np.asarray(a, dtype=float))


def torus_scale(c: float, a: npt.ArrayLike) -> TorusPoint:
    """Componentwise product with a real number reduced into (−π, π]."""
    return normalize(c * np.asarray(a, dtype=float))


def torus_distance(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    """Largest coordinate distance between ``a`` and ``b`` on the circle."""
    diff = normalize(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    if diff.size == 0:
        return 0.0
    return float(np.max(np.abs(diff)))


@dataclass(frozen=True)
class TorusGrid:
    """Uniform n³ momentum grid, the dual group of Z_n³, optionally translated.

    Point ``i`` has integer digits ``(j1, j2, j3)`` with ``i = (j1·n + j2)·n + j3``
    (last digit fastest) and momentum ``normalize(2π·j/n + offset)``. Index
    arithmetic on digits is exact, so sums and differences of grid momenta are
    looked up without any floating-point comparison.

    Attributes:
        n: Points per axis.
        offset: Translation applied to every point (zero for the plain grid).
    """

    n: int
    offset: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise InvalidResolutionError(f"grid resolution must be an integer >= 2, got {self.n!r}")

    @property
    def size(self) -> int:
        return int(self.n) ** 3

    @property
    def weight(self) -> float:
        """Quadrature weight (2π/n)³ of every point."""
        return (TWO_PI / self.n) ** 3

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n

    @cached_property
    def digits(self) -> npt.NDArray[np.int64]:
        """Integer digits of every point, shape ``(n³, 3)``, lexicographic order."""
        axis = np.arange(self.n)
        mesh = np.meshgrid(axis, axis, axis, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1).astype(np.int64)

    @cached_property
    def points(self) -> TorusPoint:
        """Momenta of every point, shape ``(n³, 3)``."""
        return normalize(self.spacing * self.digits + np.asarray(self.offset, dtype=float))

    def index_of(self, digits: npt.ArrayLike) -> npt.NDArray[np.int64]:
        """Flat index of (possibly out-of-range) integer digits, taken mod n."""
        d = np.mod(np.asarray(digits, dtype=np.int64), self.n)
        return (d[..., 0] * self.n + d[..., 1]) * self.n + d[..., 2]

    def add_index(self, i: npt.ArrayLike, j: npt.ArrayLike) -> npt.NDArray[np.int64]:
        """Index whose digits are the sum of the digits of ``i`` and ``j``."""
        return self.index_of(self.digits[np.asarray(i)] + self.digits[np.asarray(j)])

    def sub_index(self, i: npt.ArrayLike, j: npt.ArrayLike) -> npt.NDArray[np.int64]:
        return self.index_of(self.digits[np.asarray(i)] - self.digits[np.asarray(j)])

    def neg_index(self, i: npt.ArrayLike) -> npt.NDArray[np.int64]:
        return self.index_of(-self.digits[np.asarray(i)])

    @cached_property
    def difference_table(self) -> npt.NDArray[np.int64]:
        """``table[i, j]`` is the index of digit difference ``i − j``."""
        diff = self.digits[:, None, :] - self.digits[None, :, :]
        return self.index_of(diff)

    @cached_property
    def neighbor_table(self) -> npt.NDArray[np.int64]:
        """Indices of the six axis neighbours (±1 digit, cyclic), shape ``(n³, 6)``."""
        steps = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]])
        return self.index_of(self.digits[:, None, :] + steps[None, :, :])

    def shifted(self, offset: npt.ArrayLike) -> "TorusGrid":
        """Same lattice translated by ``offset`` (a coset of the dual group)."""
        reduced = normalize(np.asarray(offset, dtype=float).reshape(3))
        return TorusGrid(int(self.n), tuple(float(v) for v in reduced))

    def contains(self, point: npt.ArrayLike, tol: float = 1e-9) -> bool:
        """Whether ``point`` coincides with a grid point up to ``tol``."""
        rel = normalize(np.asarray(point, dtype=float) - np.asarray(self.offset, dtype=float))
        scaled = rel / self.spacing
        return bool(np.all(np.abs(scaled - np.round(scaled)) * self.spacing <= tol))


@lru_cache(maxsize=None)
def make_grid(n: int) -> TorusGrid:
    """Build the plain n³ grid 2πj/n reduced into (−π, π].

    Grids are immutable, so one instance per resolution is shared.

    Args:
        n: Points per axis.

    Returns:
        TorusGrid: The grid with zero offset and weight (2π/n)³.

    Raises:
        InvalidResolutionError: If ``n < 2``.
    """
    grid = TorusGrid(n)
    logger.debug(f"Built torus grid n={n} ({grid.size} points)")
    return grid
