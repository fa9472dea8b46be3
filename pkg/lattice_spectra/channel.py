"""Channel operators H_α(K) and their two-particle branches.

The channel operator keeps only the pair-α interaction. Its fiber over the
spectator momentum p is a shifted two-body operator:

    H_α(K, p) = h_α((l_β + l_γ)·K + p) + ε_α(l_α·K − p)·I

so its spectrum below the three-body band is swept out by the shifted discrete
eigenvalues of h_α as p runs over the torus. The sweep is sampled on a grid and
the samples are merged into a finite union of closed intervals.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from lattice_spectra.config import CHANNEL_SETTINGS
from lattice_spectra.exceptions import PreconditionError
from lattice_spectra.model import (
    LatticeCoefficients,
    ModelConfig,
    channel_partners,
    eval_dispersion,
    inverse_split_three,
)
from lattice_spectra.parallel import parallel_map
from lattice_spectra.torus import TorusGrid, TorusPoint, normalize
from lattice_spectra.twobody import (
    Band,
    SymmetricOperatorMatrix,
    TwoBodySpectrum,
    aligned_fiber_grid,
    discrete_spectrum,
    fredholm_determinant,
    potential_matrix,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntervalUnion:
    """Finite union of closed intervals, sorted and pairwise disjoint.

    Attributes:
        intervals: ``(lo, hi)`` pairs sorted by ``lo``.
    """

    intervals: Tuple[Tuple[float, float], ...] = ()

    @classmethod
    def from_intervals(cls, intervals: Iterable[Sequence[float]], gap_tol: float = 0.0) -> "IntervalUnion":
        """Sort intervals and merge those separated by at most ``gap_tol``.

        Raises:
            ValueError: If an interval has ``lo > hi``.
        """
        items = sorted((float(lo), float(hi)) for lo, hi in intervals)
        merged: List[Tuple[float, float]] = []
        for lo, hi in items:
            if lo > hi:
                raise ValueError(f"interval [{lo}, {hi}] is reversed")
            if merged and lo - merged[-1][1] <= gap_tol:
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        return cls(tuple(merged))

    @property
    def count(self) -> int:
        return len(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def lo(self) -> float:
        if self.is_empty:
            raise ValueError("empty interval union has no lower end")
        return self.intervals[0][0]

    @property
    def hi(self) -> float:
        if self.is_empty:
            raise ValueError("empty interval union has no upper end")
        return self.intervals[-1][1]

    def union(self, other: "IntervalUnion", gap_tol: float = 0.0) -> "IntervalUnion":
        return IntervalUnion.from_intervals(self.intervals + other.intervals, gap_tol)

    def widened(self, delta: float) -> "IntervalUnion":
        """Every interval grown by ``delta`` on both sides, re-merged."""
        return IntervalUnion.from_intervals((lo - delta, hi + delta) for lo, hi in self.intervals)

    def component_index(self, x: float, tol: float = 0.0) -> Optional[int]:
        for index, (lo, hi) in enumerate(self.intervals):
            if lo - tol <= x <= hi + tol:
                return index
        return None

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.component_index(x, tol) is not None

    def gaps(self) -> List[Tuple[float, float]]:
        """Open gaps between consecutive intervals."""
        return [(a[1], b[0]) for a, b in zip(self.intervals[:-1], self.intervals[1:])]

    def distance_to(self, x: float) -> float:
        if self.is_empty:
            return float("inf")
        return min(max(lo - x, x - hi, 0.0) for lo, hi in self.intervals)

    def hausdorff_distance(self, other: "IntervalUnion") -> float:
        """Hausdorff distance between the two point sets."""
        if self.is_empty and other.is_empty:
            return 0.0
        if self.is_empty or other.is_empty:
            return float("inf")

        def one_sided(a: "IntervalUnion", b: "IntervalUnion") -> float:
            candidates = [x for interval in a.intervals for x in interval]
            candidates += [
                0.5 * (g_lo + g_hi) for g_lo, g_hi in b.gaps() if a.contains(0.5 * (g_lo + g_hi))
            ]
            return max(b.distance_to(x) for x in candidates)

        return max(one_sided(self, other), one_sided(other, self))

    def to_list(self) -> List[List[float]]:
        return [[lo, hi] for lo, hi in self.intervals]


@dataclass(frozen=True)
class ChannelFiberSpectrum:
    """Spectrum of the channel fiber H_α(K, p).

    Attributes:
        p: Spectator momentum.
        k: Pair momentum (l_β + l_γ)·K + p of the underlying two-body fiber.
        shift: ε_α(l_α·K − p).
        two_body: Spectrum of h_α(k).
    """

    p: Tuple[float, float, float]
    k: Tuple[float, float, float]
    shift: float
    two_body: TwoBodySpectrum

    @property
    def band(self) -> Band:
        return self.two_body.band.shifted(self.shift)

    @property
    def below(self) -> Tuple[float, ...]:
        """Fiber eigenvalues below the fiber band."""
        return tuple(v + self.shift for v in self.two_body.below)


@dataclass(frozen=True)
class BranchSample:
    """One shifted below-band eigenvalue of one channel fiber.

    Attributes:
        p_index: Index of p on the spectator grid.
        p: Spectator momentum.
        branch: Position of the eigenvalue among the fiber's below-band ones.
        value: The shifted eigenvalue.
    """

    p_index: int
    p: Tuple[float, float, float]
    branch: int
    value: float


@dataclass(frozen=True)
class ChannelSpectrum:
    """σ_two samples of one channel and the intervals assembled from them.

    Attributes:
        alpha: Channel index.
        samples: Branch samples over the spectator grid.
        branches: Intervals assembled from the samples alone.
        union: ``branches`` merged with the three-body band.
        gap_tol: Merge tolerance actually used.
        band: Three-body band [E_min(K), E_max(K)].
    """

    alpha: int
    samples: Tuple[BranchSample, ...]
    branches: "IntervalUnion"
    union: "IntervalUnion"
    gap_tol: float
    band: Band = field(compare=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "sample_count": len(self.samples),
            "branches": self.branches.to_list(),
            "intervals": self.union.to_list(),
            "gap_tol": self.gap_tol
        }


def channel_momentum(model: ModelConfig, alpha: int, K: npt.ArrayLike, p: npt.ArrayLike) -> TorusPoint:
    """Pair momentum (l_β + l_γ)·K + p of the fiber at spectator momentum p."""
    return normalize((1.0 - model.derived.l_of(alpha)) * np.asarray(K, dtype=float) + np.asarray(p, dtype=float))


def channel_shift(model: ModelConfig, alpha: int, K: npt.ArrayLike, p: npt.ArrayLike) -> float:
    """Kinetic energy ε_α(l_α·K − p) of the spectator particle."""
    k_alpha = normalize(model.derived.l_of(alpha) * np.asarray(K, dtype=float) - np.asarray(p, dtype=float))
    return float(eval_dispersion(model.dispersion(alpha), k_alpha))


def spectator_grid(grid: TorusGrid, model: ModelConfig, alpha: int, K: npt.ArrayLike) -> TorusGrid:
    """Grid of spectator momenta matching the momentum-triple basis on ``grid``.

    Particles 1 and 2 sit on ``grid`` and k₃ = K − k₁ − k₂, so p = l_α·K − k_α
    runs over a translate of the grid.
    """
    channel_partners(alpha)
    K = normalize(K)
    base = np.asarray(grid.offset, dtype=float)
    if alpha in (1, 2):
        return grid.shifted(model.derived.l_of(alpha) * K - base)
    return grid.shifted((model.derived.l_of(3) - 1.0) * K + 2.0 * base)


def channel_fiber(
    model: ModelConfig,
    alpha: int,
    K: npt.ArrayLike,
    p: npt.ArrayLike,
    grid: TorusGrid,
    potential: Optional[LatticeCoefficients] = None,
    solver: str = "dense",
    continuum_tol: Optional[float] = 0.0
) -> ChannelFiberSpectrum:
    """Spectrum of H_α(K, p) via the two-body fiber at the shifted momentum.

    Args:
        model: Validated model.
        alpha: Channel index.
        K: Total momentum.
        p: Spectator momentum.
        grid: Base grid; the relative momentum runs over its aligned translate.
        potential: Override of the channel potential.
        solver: Two-body solver (see :func:`discrete_spectrum`).
        continuum_tol: Band widening passed to :func:`discrete_spectrum`; the
            default keeps every eigenvalue below the band, as σ_two needs.

    Returns:
        ChannelFiberSpectrum: Shift and two-body spectrum.
    """
    p = normalize(p)
    k = channel_momentum(model, alpha, K, p)
    fiber_grid = aligned_fiber_grid(grid, model, alpha, k)
    two_body = discrete_spectrum(
        model, alpha, k, fiber_grid, potential, continuum_tol=continuum_tol, solver=solver
    )
    return ChannelFiberSpectrum(
        tuple(float(v) for v in p), tuple(float(v) for v in k), channel_shift(model, alpha, K, p), two_body
    )


def build_channel_fiber_matrix(
    model: ModelConfig,
    alpha: int,
    K: npt.ArrayLike,
    p: npt.ArrayLike,
    grid: TorusGrid,
    potential: Optional[LatticeCoefficients] = None
) -> SymmetricOperatorMatrix:
    """H_α(K, p) built directly: three kinetic energies minus the pair potential."""
    potential = model.potential(alpha) if potential is None else potential
    K, p = normalize(K), normalize(p)
    fiber_grid = aligned_fiber_grid(grid, model, alpha, channel_momentum(model, alpha, K, p))
    momenta = inverse_split_three(K, fiber_grid.points, p, model.derived, alpha)
    diagonal = sum(np.asarray(eval_dispersion(model.dispersion(i), k)) for i, k in zip((1, 2, 3), momenta))
    return SymmetricOperatorMatrix(np.diag(diagonal) - potential_matrix(potential, grid.n), fiber_grid)


def sigma_two(
    model: ModelConfig,
    alpha: int,
    K: npt.ArrayLike,
    grid: TorusGrid,
    potential: Optional[LatticeCoefficients] = None,
    solver: Optional[str] = None,
    threads: Optional[int] = None
) -> List[BranchSample]:
    """Sweep the spectator grid and collect shifted below-band fiber eigenvalues.

    Args:
        model: Validated model.
        alpha: Channel index.
        K: Total momentum.
        grid: Base grid (resolution of both p and q).
        potential: Override of the channel potential.
        solver: Two-body solver; defaults to the configured one.
        threads: Worker cap for the p-sweep.

    Returns:
        List[BranchSample]: Samples ordered by p index, then branch.
    """
    potential = model.potential(alpha) if potential is None else potential
    if len(potential) == 0:
        return []
    solver = CHANNEL_SETTINGS["fiber_solver"] if solver is None else solver
    K = normalize(K)
    p_grid = spectator_grid(grid, model, alpha, K)

    def fiber(index: int) -> ChannelFiberSpectrum:
        return channel_fiber(model, alpha, K, p_grid.points[index], grid, potential, solver=solver)

    fibers = parallel_map(fiber, range(p_grid.size), threads)
    samples = [
        BranchSample(index, f.p, branch, value)
        for index, f in enumerate(fibers)
        for branch, value in enumerate(f.below)
    ]
    logger.info(f"sigma_two channel {alpha}: {len(samples)} samples over {p_grid.size} fibers (n={grid.n})")
    return samples


def branch_spacing(samples: Sequence[BranchSample], grid: TorusGrid) -> float:
    """Largest change of a branch between neighbouring spectator grid points."""
    by_key = {(s.p_index, s.branch): s.value for s in samples}
    spacing = 0.0
    for s in samples:
        for neighbor in grid.neighbor_table[s.p_index]:
            other = by_key.get((int(neighbor), s.branch))
            if other is not None:
                spacing = max(spacing, abs(other - s.value))
    return spacing


def default_gap_tol(samples: Sequence[BranchSample], grid: TorusGrid) -> float:
    """Merge tolerance: a multiple of :func:`branch_spacing`, never zero."""
    spacing = branch_spacing(samples, grid)
    scale = max((abs(s.value) for s in samples), default=1.0)
    return max(CHANNEL_SETTINGS["gap_tol_factor"] * spacing, 1e-9 * max(1.0, scale))


def assemble_intervals(samples: Sequence[float], gap_tol: float) -> IntervalUnion:
    """Merge sorted samples whose consecutive gaps are at most ``gap_tol``.

    Raises:
        PreconditionError: If ``gap_tol`` is not positive.
    """
    if not gap_tol > 0.0:
        raise PreconditionError(f"gap_tol must be positive, got {gap_tol}")
    return IntervalUnion.from_intervals(((v, v) for v in samples), gap_tol)


def analyze_channel(
    model: ModelConfig,
    alpha: int,
    K: npt.ArrayLike,
    grid: TorusGrid,
    potential: Optional[LatticeCoefficients] = None,
    gap_tol: Optional[float] = None,
    threads: Optional[int] = None,
    solver: Optional[str] = None,
    three_band: Optional[Band] = None
) -> ChannelSpectrum:
    """σ_two samples, assembled branches and the full channel spectrum.

    Args:
        three_band: Precomputed three-body band; computed when omitted.

    Returns:
        ChannelSpectrum: Everything the channel sweep produced.
    """
    if three_band is None:
        from lattice_spectra.threebody import three_body_band

        three_band = three_body_band(model, K, grid)
    samples = sigma_two(model, alpha, K, grid, potential, solver=solver, threads=threads)
    p_grid = spectator_grid(grid, model, alpha, K)
    tol = default_gap_tol(samples, p_grid) if gap_tol is None else gap_tol
    branches = assemble_intervals([s.value for s in samples], tol) if samples else IntervalUnion()
    union = branches.union(IntervalUnion(((three_band.lo, three_band.hi),)), gap_tol=tol)
    logger.info(f"Channel {alpha}: {branches.count} branch interval(s), {union.count} after merging the band")
    return ChannelSpectrum(alpha, tuple(samples), branches, union, tol, three_band)


def channel_spectrum(
    model: ModelConfig,
    alpha: int,
    K: npt.ArrayLike,
    grid: TorusGrid,
    potential: Optional[LatticeCoefficients] = None,
    gap_tol: Optional[float] = None,
    threads: Optional[int] = None
) -> IntervalUnion:
    """σ(H_α(K)) as assembled σ_two merged with [E_min(K), E_max(K)]."""
    return analyze_channel(model, alpha, K, grid, potential, gap_tol, threads).union


def channel_fredholm_determinant(
    model: ModelConfig,
    alpha: int,
    K: npt.ArrayLike,
    p: npt.ArrayLike,
    z: float,
    grid: TorusGrid,
    potential: Optional[LatticeCoefficients] = None
) -> float:
    """Δ_α(K, p, z) = Δ(k, z − ε_α(l_α·K − p)); its zeros are the σ_two values at p."""
    p = normalize(p)
    k = channel_momentum(model, alpha, K, p)
    shift = channel_shift(model, alpha, K, p)
    return fredholm_determinant(model, alpha, k, z - shift, aligned_fiber_grid(grid, model, alpha, k), potential)


@dataclass(frozen=True)
class CoverageReport:
    """Per gap component, the spectator points with no eigenvalue inside it.

    Attributes:
        components: Branch intervals separated from the band by more than 2δ.
        missing: For each component, p indices lacking an eigenvalue in it.
        delta: Band tolerance δ used for the separation test.
    """

    components: Tuple[Tuple[float, float], ...]
    missing: Tuple[Tuple[int, ...], ...]
    delta: float

    @property
    def covered(self) -> bool:
        return all(not m for m in self.missing)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "components": [list(c) for c in self.components],
            "missing": [list(m) for m in self.missing],
            "delta": self.delta,
            "covered": self.covered
        }


def gap_component_coverage(spectrum: ChannelSpectrum, grid: TorusGrid, delta: float) -> CoverageReport:
    """Check that every gap component of σ_two is met by every fiber.

    A component counts as a gap component when it is separated from the
    three-body band by more than ``2·delta``.

    Args:
        spectrum: Result of :func:`analyze_channel`.
        grid: The spectator grid the samples were taken on.
        delta: Band tolerance δ.

    Returns:
        CoverageReport: Components and uncovered p indices.
    """
    band_union = IntervalUnion(((spectrum.band.lo, spectrum.band.hi),))
    components = []
    missing = []
    for lo, hi in spectrum.branches.intervals:
        separation = min(band_union.distance_to(lo), band_union.distance_to(hi))
        if band_union.contains(lo) or band_union.contains(hi) or separation <= 2.0 * delta:
            continue
        hit = {s.p_index for s in spectrum.samples if lo <= s.value <= hi}
        components.append((lo, hi))
        missing.append(tuple(i for i in range(grid.size) if i not in hit))
    report = CoverageReport(tuple(components), tuple(missing), delta)
    if not report.covered:
        logger.warning(f"Channel {spectrum.alpha}: gap components not met by every fiber: {report.to_dict()}")
    return report
