"""Spectral engine for the two-particle fiber operator h_α(k).

The fiber operator acts on functions of the relative momentum q:

    (h_α(k) f)(q) = E_k(q) f(q) − (2π)^{−3/2} ∫ v_α(q − q') f(q') dq'

with symbol E_k(q) = ε_β(l_γβ·k + q) + ε_γ(l_βγ·k − q). On an n³ grid the
integral becomes a Riemann sum with weight (2π/n)³, which is exactly the finite
periodic lattice model, so every identity below holds to rounding error.

This module provides:
- The symbol, its derivatives, and the band [E_min(k), E_max(k)]
- Dense fiber matrices and their discrete spectrum
- Birman-Schwinger operators and eigenvalue counting
- Fredholm determinants and a bound-state finder built on them
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import scipy.optimize

from lattice_spectra.config import CHANNEL_SETTINGS, NUMERICAL_SETTINGS
from lattice_spectra.exceptions import (
    NumericalFailureError,
    OutOfDomainError,
    PreconditionError,
    SingularDenominatorError,
)
from lattice_spectra.linalg import Matrix, determinant, symmetric_eigh, symmetric_eigvalsh, symmetry_defect
from lattice_spectra.model import (
    FOURIER_PREFACTOR,
    LatticeCoefficients,
    ModelConfig,
    RealOrArray,
    channel_partners,
    dispersion_gradient,
    dispersion_hessian,
    eval_dispersion,
    eval_potential,
    inverse_split_two,
    potential_sqrt_kernel,
)
from lattice_spectra.torus import TorusGrid, TorusPoint, make_grid, normalize, torus_distance

logger = logging.getLogger(__name__)

SOLVERS = ("dense", "low_rank", "auto")


@dataclass(frozen=True)
class Band:
    """Closed interval [lo, hi] swept by a symbol."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError(f"band lower end {self.lo} exceeds upper end {self.hi}")

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def shifted(self, shift: float) -> "Band":
        return Band(self.lo + shift, self.hi + shift)

    def to_dict(self) -> Dict[str, float]:
        return {"lo": self.lo, "hi": self.hi}


@dataclass(frozen=True, eq=False)
class SymmetricOperatorMatrix:
    """Dense real symmetric discretization of a fiber operator.

    Attributes:
        entries: The matrix.
        grid: Grid the basis is built on.
        order: Number of grid factors in the basis (1 for two-body fibers,
            2 for three-body fibers), so ``dim == grid.size ** order``.
    """

    entries: Matrix
    grid: TorusGrid
    order: int = 1

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    def symmetry_defect(self) -> float:
        return symmetry_defect(self.entries)

    def eigenvalues(self, method: str = "auto") -> npt.NDArray[np.float64]:
        return symmetric_eigvalsh(self.entries, method)


@dataclass(frozen=True)
class TwoBodySpectrum:
    """Band and the eigenvalues of h_α(k) outside it.

    Attributes:
        band: [E_min(k), E_max(k)].
        below: Ascending eigenvalues below ``band.lo − continuum_tol``.
        above: Ascending eigenvalues above ``band.hi + continuum_tol``.
        continuum_tol: Band widening used for the classification.
    """

    band: Band
    below: Tuple[float, ...] = ()
    above: Tuple[float, ...] = ()
    continuum_tol: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "band": self.band.to_dict(),
            "below": list(self.below),
            "above": list(self.above),
            "continuum_tol": self.continuum_tol
        }


def _noise_tol(lo: float, hi: float) -> float:
    return 1e-10 * max(1.0, abs(lo), abs(hi))


def two_body_symbol(model: ModelConfig, alpha: int, k: npt.ArrayLike, q: npt.ArrayLike) -> RealOrArray:
    """E_k(q) = ε_β(l_γβ·k + q) + ε_γ(l_βγ·k − q), vectorized over ``q``.

    Args:
        model: Validated model.
        alpha: Channel (pair) index.
        k: Pair momentum.
        q: One point or an ``(N, 3)`` array of relative momenta.

    Returns:
        RealOrArray: Symbol value(s).
    """
    beta, gamma = channel_partners(alpha)
    k_beta, k_gamma = inverse_split_two(k, q, model.derived, alpha)
    return eval_dispersion(model.dispersion(beta), k_beta) + eval_dispersion(model.dispersion(gamma), k_gamma)


def two_body_symbol_gradient(
    model: ModelConfig, alpha: int, k: npt.ArrayLike, q: npt.ArrayLike
) -> npt.NDArray[np.float64]:
    beta, gamma = channel_partners(alpha)
    k_beta, k_gamma = inverse_split_two(k, q, model.derived, alpha)
    return dispersion_gradient(model.dispersion(beta), k_beta) - dispersion_gradient(model.dispersion(gamma), k_gamma)


def two_body_symbol_hessian(
    model: ModelConfig, alpha: int, k: npt.ArrayLike, q: npt.ArrayLike
) -> npt.NDArray[np.float64]:
    beta, gamma = channel_partners(alpha)
    k_beta, k_gamma = inverse_split_two(k, q, model.derived, alpha)
    return dispersion_hessian(model.dispersion(beta), k_beta) + dispersion_hessian(model.dispersion(gamma), k_gamma)


def refine_extremum(
    fun: Callable[[npt.NDArray[np.float64]], float],
    jac: Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]],
    x0: npt.NDArray[np.float64],
    maximize: bool = False
) -> Tuple[float, npt.NDArray[np.float64], bool]:
    """Polish a grid extremum with BFGS.

    Returns:
        Tuple[float, ndarray, bool]: Extremal value, location, and whether the
        gradient tolerance was met.
    """
    sign = -1.0 if maximize else 1.0
    result = scipy.optimize.minimize(
        lambda x: sign * float(fun(x)),
        np.asarray(x0, dtype=float),
        jac=lambda x: sign * np.asarray(jac(x), dtype=float),
        method="BFGS",
        options={"gtol": NUMERICAL_SETTINGS["gradient_tol"]}
    )
    if not result.success:
        logger.debug(f"Extremum refinement stopped early: {result.message}")
    return sign * float(result.fun), np.asarray(result.x), bool(result.success)


def band(model: ModelConfig, alpha: int, k: npt.ArrayLike, grid: TorusGrid) -> Band:
    """[E_min(k), E_max(k)] from a grid search refined by local descent/ascent.

    Args:
        model: Validated model.
        alpha: Channel index.
        k: Pair momentum.
        grid: Search grid (any offset).

    Returns:
        Band: Never narrower than the grid values.
    """
    k = normalize(k)
    values = np.asarray(two_body_symbol(model, alpha, k, grid.points))

    def fun(q: npt.NDArray[np.float64]) -> float:
        return float(two_body_symbol(model, alpha, k, q))

    def jac(q: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        return two_body_symbol_gradient(model, alpha, k, q)

    lo, _, _ = refine_extremum(fun, jac, grid.points[int(np.argmin(values))])
    hi, _, _ = refine_extremum(fun, jac, grid.points[int(np.argmax(values))], maximize=True)
    return Band(min(lo, float(values.min())), max(hi, float(values.max())))


def aligned_fiber_grid(grid: TorusGrid, model: ModelConfig, alpha: int, k: npt.ArrayLike) -> TorusGrid:
    """Relative-momentum grid placing the lower-numbered particle of the pair on ``grid``.

    With this choice both particle momenta of every fiber state are points of
    the base grid whenever ``k`` is a sum of two base grid points, so fibers
    of a coarse full operator are reproduced exactly.
    """
    beta, gamma = channel_partners(alpha)
    k = normalize(k)
    base = np.asarray(grid.offset, dtype=float)
    if beta < gamma:
        return grid.shifted(base - model.derived.l_pair(gamma, beta) * k)
    return grid.shifted(model.derived.l_pair(beta, gamma) * k - base)


@lru_cache(maxsize=64)
def potential_matrix(potential: LatticeCoefficients, n: int, sqrt: bool = False) -> Matrix:
    """Grid kernel weight·(2π)^{−3/2}·v(q_i − q_j) of the potential convolution.

    Depends on the grid only through index differences, so it is shared by all
    translated grids of resolution ``n``. The returned array is read-only.

    Args:
        potential: Potential table.
        n: Grid resolution.
        sqrt: Use the kernel of the square-root operator instead.

    Returns:
        Matrix: Symmetric ``(n³, n³)`` array.
    """
    grid = make_grid(n)
    kernel = potential_sqrt_kernel if sqrt else eval_potential
    column = grid.weight * FOURIER_PREFACTOR * np.asarray(kernel(potential, grid.points), dtype=float)
    matrix = column[grid.difference_table]
    matrix.flags.writeable = False
    return matrix


@lru_cache(maxsize=64)
def potential_factor(
    potential: LatticeCoefficients, n: int, sqrt: bool = False
) -> Tuple[Matrix, npt.NDArray[np.float64]]:
    """Orthonormal range basis Q and nonzero eigenvalues λ of the grid kernel.

    The kernel equals Q·diag(λ)·Qᵀ; its rank is the number of distinct
    classes of the potential's support modulo n.
    """
    matrix = potential_matrix(potential, n, sqrt)
    eigenvalues, vectors = symmetric_eigh(np.asarray(matrix), method="lapack")
    scale = max(1.0, float(np.max(np.abs(eigenvalues)))) if eigenvalues.size else 1.0
    keep = np.abs(eigenvalues) > NUMERICAL_SETTINGS["rank_tol"] * scale
    basis, values = vectors[:, keep], eigenvalues[keep]
    basis.flags.writeable = False
    values.flags.writeable = False
    logger.debug(f"Potential kernel on n={n} (sqrt={sqrt}) has rank {values.size}")
    return basis, values


def build_h_matrix(
    model: ModelConfig,
    alpha: int,
    k: npt.ArrayLike,
    grid: TorusGrid,
    potential: Optional[LatticeCoefficients] = None
) -> SymmetricOperatorMatrix:
    """Dense h_α(k): diagonal symbol minus the potential kernel.

    The kernel carries the convolution factor (2π)^{−3/2} on top of the one in
    v(p), so a zero-range table of strength μ enters every entry as μ/n³.

    Args:
        model: Validated model.
        alpha: Channel index.
        k: Pair momentum.
        grid: Relative-momentum grid.
        potential: Override of the channel potential.

    Returns:
        SymmetricOperatorMatrix: Matrix of dimension ``grid.size``.
    """
    potential = model.potential(alpha) if potential is None else potential
    symbol = np.asarray(two_body_symbol(model, alpha, k, grid.points))
    entries = np.diag(symbol) - potential_matrix(potential, grid.n)
    return SymmetricOperatorMatrix(entries, grid)


def symbol_gap(values: npt.ArrayLike) -> float:
    """Largest gap between adjacent sorted values (0 for fewer than two values)."""
    ordered = np.sort(np.asarray(values, dtype=float).ravel())
    return float(np.max(np.diff(ordered))) if ordered.size > 1 else 0.0


def _resolve_solver(solver: str, grid: TorusGrid) -> str:
    if solver not in SOLVERS:
        raise PreconditionError(f"unknown fiber solver {solver!r}; expected one of {SOLVERS}")
    if solver == "auto":
        return "dense" if grid.size <= CHANNEL_SETTINGS["dense_fiber_max_dim"] else "low_rank"
    return solver


def _compressed_counter(
    symbol: npt.NDArray[np.float64], basis: Matrix, values: npt.NDArray[np.float64]
) -> Callable[[float], int]:
    root = np.sqrt(values)

    def count(z: float) -> int:
        compressed = (basis * (1.0 / (symbol - z))[:, None]).T @ basis
        compressed = root[:, None] * compressed * root[None, :]
        return int(np.sum(symmetric_eigvalsh(0.5 * (compressed + compressed.T)) > 1.0))

    return count


def _low_rank_below(
    symbol: npt.NDArray[np.float64], potential: LatticeCoefficients, n: int, top: float
) -> npt.NDArray[np.float64]:
    basis, values = potential_factor(potential, n)
    if values.size == 0:
        return np.zeros(0)
    count = _compressed_counter(symbol, basis, values)
    total = count(top)
    if total == 0:
        return np.zeros(0)
    bottom = top - float(np.max(values)) - 1.0
    found = [
        scipy.optimize.bisect(
            lambda z, i=i: count(z) - i + 0.5, bottom, top, xtol=NUMERICAL_SETTINGS["root_xtol"]
        )
        for i in range(1, total + 1)
    ]
    return np.asarray(found)


def discrete_spectrum(
    model: ModelConfig,
    alpha: int,
    k: npt.ArrayLike,
    grid: TorusGrid,
    potential: Optional[LatticeCoefficients] = None,
    continuum_tol: Optional[float] = None,
    solver: str = "dense",
    method: str = "auto",
    known_band: Optional[Band] = None
) -> TwoBodySpectrum:
    """Eigenvalues of h_α(k) outside its band.

    The dense solver diagonalizes :func:`build_h_matrix`. The low-rank solver
    only sees the part below the band: it counts eigenvalues through the
    compressed Birman-Schwinger operator and locates each one by bisection on
    the count.

    Args:
        model: Validated model.
        alpha: Channel index.
        k: Pair momentum.
        grid: Relative-momentum grid.
        potential: Override of the channel potential.
        continuum_tol: Widening of the band before classification; defaults to
            :func:`symbol_gap` of the grid symbol. ``0.0`` keeps only a
            rounding-level guard, so every eigenvalue off the band counts.
        solver: ``"dense"``, ``"low_rank"`` or ``"auto"``.
        method: Eigensolver for the dense path.
        known_band: Precomputed band of this fiber.

    Returns:
        TwoBodySpectrum: The band with eigenvalues below and above it.

    Raises:
        NumericalFailureError: If the eigensolver fails.
    """
    k = normalize(k)
    potential = model.potential(alpha) if potential is None else potential
    b = band(model, alpha, k, grid) if known_band is None else known_band
    symbol = np.asarray(two_body_symbol(model, alpha, k, grid.points))
    tol = symbol_gap(symbol) if continuum_tol is None else continuum_tol
    tol = max(tol, _noise_tol(b.lo, b.hi))

    if _resolve_solver(solver, grid) == "dense":
        eigenvalues = build_h_matrix(model, alpha, k, grid, potential).eigenvalues(method)
    else:
        top = min(b.lo, float(symbol.min())) - tol
        eigenvalues = _low_rank_below(symbol, potential, grid.n, top)

    below = tuple(float(v) for v in np.sort(eigenvalues[eigenvalues < b.lo - tol]))
    above = tuple(float(v) for v in np.sort(eigenvalues[eigenvalues > b.hi + tol]))
    logger.debug(f"h_{alpha}(k={k.tolist()}): band [{b.lo:.6g}, {b.hi:.6g}], {len(below)} below, {len(above)} above")
    return TwoBodySpectrum(b, below, above, tol)


def _symbol_below(
    model: ModelConfig, alpha: int, k: TorusPoint, z: float, grid: TorusGrid, b: Band, closed: bool
) -> npt.NDArray[np.float64]:
    if z > b.lo or (not closed and z == b.lo):
        raise OutOfDomainError(f"z={z} is not below the band [{b.lo}, {b.hi}]")
    denominators = np.asarray(two_body_symbol(model, alpha, k, grid.points)) - z
    if np.any(denominators <= 0.0):
        raise SingularDenominatorError(
            f"E(q) - z vanishes on the grid at z={z}; use z strictly below {b.lo} or another grid"
        )
    return denominators


def birman_schwinger(
    model: ModelConfig,
    alpha: int,
    k: npt.ArrayLike,
    z: float,
    grid: TorusGrid,
    potential: Optional[LatticeCoefficients] = None,
    known_band: Optional[Band] = None
) -> SymmetricOperatorMatrix:
    """Birman-Schwinger operator G(k, z) on the grid.

    Entries are weight·(2π)^{−3/2}·v(q_i − q_j)/√((E(q_i) − z)(E(q_j) − z)).

    Raises:
        OutOfDomainError: If ``z > band.lo``.
        SingularDenominatorError: If ``E(q_i) = z`` at a grid point.
    """
    k = normalize(k)
    potential = model.potential(alpha) if potential is None else potential
    b = band(model, alpha, k, grid) if known_band is None else known_band
    scale = 1.0 / np.sqrt(_symbol_below(model, alpha, k, z, grid, b, closed=True))
    entries = potential_matrix(potential, grid.n) * np.outer(scale, scale)
    return SymmetricOperatorMatrix(entries, grid)


def count_eigenvalues(
    model: ModelConfig,
    alpha: int,
    k: npt.ArrayLike,
    z: float,
    grid: TorusGrid,
    potential: Optional[LatticeCoefficients] = None,
    known_band: Optional[Band] = None,
    method: str = "auto"
) -> int:
    """N(k, z): number of eigenvalues of G(k, z) strictly greater than 1.

    Raises:
        OutOfDomainError: If ``z`` is not strictly below ``band.lo``.
    """
    k = normalize(k)
    b = band(model, alpha, k, grid) if known_band is None else known_band
    if z >= b.lo:
        raise OutOfDomainError(f"counting needs z strictly below the band, got z={z} >= {b.lo}")
    g = birman_schwinger(model, alpha, k, z, grid, potential, known_band=b)
    return int(np.sum(g.eigenvalues(method) > 1.0))


def count_limit_sweep(
    model: ModelConfig,
    alpha: int,
    k: npt.ArrayLike,
    grid: TorusGrid,
    steps: int = 12,
    potential: Optional[LatticeCoefficients] = None
) -> List[Tuple[float, int]]:
    """N(k, z_j) along z_j = E_min − span·2^{−j} approaching the band from below.

    The grid operator is singular at E_min itself, so the edge is reached as a
    limit of counts.
    """
    k = normalize(k)
    potential = model.potential(alpha) if potential is None else potential
    b = band(model, alpha, k, grid)
    span = float(np.sum(potential.values)) + 1.0
    sweep = []
    for j in range(steps):
        z = b.lo - span * 2.0 ** (-j)
        sweep.append((z, count_eigenvalues(model, alpha, k, z, grid, potential, known_band=b)))
    return sweep


def fredholm_determinant(
    model: ModelConfig,
    alpha: int,
    k: npt.ArrayLike,
    z: float,
    grid: TorusGrid,
    potential: Optional[LatticeCoefficients] = None,
    known_band: Optional[Band] = None
) -> float:
    """Δ(k, z) = det(I − V·R₀(k, z)) for real z off the band.

    Raises:
        OutOfDomainError: If ``band.lo ≤ z ≤ band.hi``.
    """
    k = normalize(k)
    potential = model.potential(alpha) if potential is None else potential
    b = band(model, alpha, k, grid) if known_band is None else known_band
    if b.contains(z):
        raise OutOfDomainError(f"z={z} lies in the band [{b.lo}, {b.hi}]")
    resolvent = 1.0 / (np.asarray(two_body_symbol(model, alpha, k, grid.points)) - z)
    return determinant(np.eye(grid.size) - potential_matrix(potential, grid.n) * resolvent[None, :])


def fredholm_zeros(
    model: ModelConfig,
    alpha: int,
    k: npt.ArrayLike,
    grid: TorusGrid,
    z_lo: Optional[float] = None,
    z_hi: Optional[float] = None,
    samples: int = 400,
    potential: Optional[LatticeCoefficients] = None
) -> List[float]:
    """Zeros of Δ(k, ·) below the band: sign-change scan refined by Brent's method.

    Zeros of even multiplicity (degenerate eigenvalues) do not change sign and
    are not reported.

    Args:
        z_lo: Scan start; defaults to E_min − Σv̂ − 1, below every eigenvalue.
        z_hi: Scan end; defaults to just below E_min.
        samples: Number of scan points.

    Returns:
        List[float]: Ascending zeros.
    """
    k = normalize(k)
    potential = model.potential(alpha) if potential is None else potential
    b = band(model, alpha, k, grid)
    lo = b.lo - float(np.sum(potential.values)) - 1.0 if z_lo is None else z_lo
    hi = b.lo - _noise_tol(b.lo, b.hi) if z_hi is None else z_hi
    if not lo < hi <= b.lo:
        raise PreconditionError(f"scan window [{lo}, {hi}] must lie below the band edge {b.lo}")

    def delta(z: float) -> float:
        return fredholm_determinant(model, alpha, k, z, grid, potential, known_band=b)

    zs = np.linspace(lo, hi, samples)
    values = [delta(z) for z in zs]
    zeros = []
    for left, right, f_left, f_right in zip(zs[:-1], zs[1:], values[:-1], values[1:]):
        if f_left == 0.0:
            zeros.append(float(left))
        elif f_left * f_right < 0.0:
            zeros.append(float(scipy.optimize.brentq(delta, left, right, xtol=NUMERICAL_SETTINGS["root_xtol"])))
    if values[-1] == 0.0:
        zeros.append(float(zs[-1]))
    logger.info(f"Fredholm scan on [{lo:.6g}, {hi:.6g}] found {len(zeros)} zero(s)")
    return zeros


def minimizer_track(
    model: ModelConfig, alpha: int, k_path: Sequence[npt.ArrayLike], grid: TorusGrid
) -> List[TorusPoint]:
    """Minimizer q_α(k) of E_k along a path of pair momenta.

    Each minimizer is found by BFGS descent from the grid argmin; consecutive
    minimizers must lie within one grid step of each other.

    Raises:
        NumericalFailureError: If a descent fails or the track jumps.
    """
    track: List[TorusPoint] = []
    for k in k_path:
        k = normalize(k)
        values = np.asarray(two_body_symbol(model, alpha, k, grid.points))
        start = grid.points[int(np.argmin(values))]
        _, x, success = refine_extremum(
            lambda q: two_body_symbol(model, alpha, k, q),
            lambda q: two_body_symbol_gradient(model, alpha, k, q),
            start
        )
        residual = float(np.linalg.norm(two_body_symbol_gradient(model, alpha, k, x)))
        if not np.all(np.isfinite(x)) or (not success and residual > 1e-6):
            raise NumericalFailureError(
                "descent to the symbol minimum diverged",
                {"k": k.tolist(), "gradient_norm": residual, "start": start.tolist()}
            )
        point = normalize(x)
        if track and torus_distance(point, track[-1]) > grid.spacing + 1e-9:
            raise NumericalFailureError(
                "minimizer track is discontinuous",
                {"k": k.tolist(), "jump": torus_distance(point, track[-1]), "grid_step": grid.spacing}
            )
        track.append(point)
    return track
