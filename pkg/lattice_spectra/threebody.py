"""Three-particle fiber operator H(K): essential spectrum, oracle and Faddeev operator.

H(K) acts on functions of two independent momenta. On a coarse grid it is built
in the momentum-triple basis: particles 1 and 2 run over the grid and
k₃ = K − k₁ − k₂. Each pair potential V_α couples states with the same
spectator momentum through the grid kernel of :func:`potential_matrix`, so the
discrete operator is block diagonal in every channel's spectator momentum and
its channel fibers coincide exactly with :func:`channel.build_channel_fiber_matrix`.

The Faddeev operator is assembled in compressed form. With the grid kernel of
V_α^{1/2} written as Q·diag(λ)·Qᵀ (nonzero λ only), the channel-α square root
is P_α·Λ_α·P_αᵀ with orthonormal P_α, and

    T_αβ = P_α·T̃_αβ·P_βᵀ,   T̃_αβ = (I − A_αα)⁻¹·A_αβ,   A_αβ = Λ_α·P_αᵀ·R₀·P_β·Λ_β.

I − T and I − T̃ share their singular values apart from extra ones, and the
block Frobenius norms agree.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import scipy.linalg
import scipy.optimize
import scipy.sparse

from lattice_spectra.channel import ChannelSpectrum, IntervalUnion, analyze_channel
from lattice_spectra.config import NUMERICAL_SETTINGS, THREE_BODY_SETTINGS
from lattice_spectra.exceptions import (
    ChannelSpectrumError,
    IncompatibleDiscretizationError,
    OutOfDomainError,
    PreconditionError,
)
from lattice_spectra.linalg import Matrix, smallest_singular_value, symmetric_eigvalsh
from lattice_spectra.model import (
    LatticeCoefficients,
    ModelConfig,
    Triple,
    channel_partners,
    dispersion_gradient,
    eval_dispersion,
    inverse_split_three,
    split_three,
)
from lattice_spectra.parallel import parallel_map
from lattice_spectra.torus import TorusGrid, TorusPoint, normalize, torus_distance
from lattice_spectra.twobody import (
    Band,
    SymmetricOperatorMatrix,
    aligned_fiber_grid,
    build_h_matrix,
    potential_factor,
    potential_matrix,
    refine_extremum,
    symbol_gap,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ThreeBodyBand(Band):
    """[E_min(K), E_max(K)] of the three-body symbol."""


@dataclass(frozen=True)
class EssentialSpectrum:
    """Essential spectrum of H(K): channel spectra merged with the band.

    Attributes:
        K: Total momentum.
        union: Merged union of all channel spectra and the band.
        channels: Per-channel sweep results.
        band: Three-body band.
        gap_tol: Merge tolerance used for the final union.
    """

    K: Tuple[float, float, float]
    union: IntervalUnion
    channels: Tuple[ChannelSpectrum, ChannelSpectrum, ChannelSpectrum]
    band: ThreeBodyBand
    gap_tol: float

    @property
    def channel_parts(self) -> Tuple[IntervalUnion, IntervalUnion, IntervalUnion]:
        return tuple(c.union for c in self.channels)  # type: ignore[return-value]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "K": list(self.K),
            "intervals": self.union.to_list(),
            "interval_count": self.union.count,
            "band": self.band.to_dict(),
            "gap_tol": self.gap_tol,
            "channels": [c.to_dict() for c in self.channels]
        }


@dataclass(frozen=True)
class ComparisonReport:
    """Verdict of a brute-force comparison run.

    Attributes:
        label: Which comparison produced the report.
        eigenvalue_count: Number of eigenvalues examined.
        delta: Widening tolerance used for containment.
        inside: Eigenvalues inside the widened reference set.
        isolated_below: Eigenvalues below the widened reference set.
        isolated_gap: Eigenvalues inside a gap of the widened reference set.
        violations: Eigenvalues above the reference set.
        max_deviation: Largest eigenvalue mismatch, for multiset comparisons.
        block_count: Number of fibers compared, for multiset comparisons.
    """

    label: str
    eigenvalue_count: int
    delta: float = 0.0
    inside: int = 0
    isolated_below: Tuple[float, ...] = ()
    isolated_gap: Tuple[float, ...] = ()
    violations: Tuple[float, ...] = ()
    max_deviation: Optional[float] = None
    block_count: int = 0

    @property
    def isolated(self) -> Tuple[float, ...]:
        return tuple(sorted(self.isolated_below + self.isolated_gap))

    @property
    def containment_fraction(self) -> float:
        if self.eigenvalue_count == 0:
            return 1.0
        return (self.inside + len(self.isolated_below) + len(self.isolated_gap)) / self.eigenvalue_count

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "eigenvalue_count": self.eigenvalue_count,
            "delta": self.delta,
            "inside": self.inside,
            "isolated_below": list(self.isolated_below),
            "isolated_gap": list(self.isolated_gap),
            "violations": list(self.violations),
            "containment_fraction": self.containment_fraction,
            "max_deviation": self.max_deviation,
            "block_count": self.block_count
        }


def total_symbol(
    model: ModelConfig, K: npt.ArrayLike, q: npt.ArrayLike, p: npt.ArrayLike, alpha: int = 1
) -> Any:
    """E(K; q, p) = ε_α(l_α·K − p) + ε_β(l_β·K + l_γβ·p + q) + ε_γ(l_γ·K + l_βγ·p − q)."""
    momenta = inverse_split_three(K, q, p, model.derived, alpha)
    return sum(eval_dispersion(model.dispersion(i), k) for i, k in zip((1, 2, 3), momenta))


def total_symbol_gradient(
    model: ModelConfig, K: npt.ArrayLike, q: npt.ArrayLike, p: npt.ArrayLike, alpha: int = 1
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Gradients of :func:`total_symbol` with respect to q and p."""
    beta, gamma = channel_partners(alpha)
    md = model.derived
    momenta = inverse_split_three(K, q, p, md, alpha)
    grads = {i: dispersion_gradient(model.dispersion(i), momenta[i - 1]) for i in (1, 2, 3)}
    grad_q = grads[beta] - grads[gamma]
    grad_p = -grads[alpha] + md.l_pair(gamma, beta) * grads[beta] + md.l_pair(beta, gamma) * grads[gamma]
    return grad_q, grad_p


@dataclass(frozen=True, eq=False)
class TripleBasis:
    """Momentum-triple basis of the discrete H(K).

    State ``I = j1·n³ + j2`` carries k₁ = g[j1], k₂ = g[j2], k₃ = K − k₁ − k₂.
    """

    grid: TorusGrid
    K: TorusPoint
    j1: npt.NDArray[np.int64]
    j2: npt.NDArray[np.int64]

    @property
    def size(self) -> int:
        return int(self.j1.size)

    def momenta(self) -> Tuple[TorusPoint, TorusPoint, TorusPoint]:
        k1 = self.grid.points[self.j1]
        k2 = self.grid.points[self.j2]
        return k1, k2, normalize(self.K - k1 - k2)

    def kinetic(self, model: ModelConfig) -> npt.NDArray[np.float64]:
        """Diagonal ε₁(k₁) + ε₂(k₂) + ε₃(k₃) of every state."""
        return sum(  # type: ignore[return-value]
            np.asarray(eval_dispersion(model.dispersion(i), k)) for i, k in zip((1, 2, 3), self.momenta())
        )


def triple_basis(grid: TorusGrid, K: npt.ArrayLike) -> TripleBasis:
    states = np.arange(grid.size, dtype=np.int64)
    return TripleBasis(grid, normalize(K), np.repeat(states, grid.size), np.tile(states, grid.size))


def channel_labels(basis: TripleBasis, alpha: int) -> Tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
    """(spectator, relative) grid labels of every state in channel α.

    The relative label is the grid index of the lower-numbered particle of the
    pair; the spectator label is the grid index of the spectator momentum
    (k₁ + k₂ for the third particle).
    """
    channel_partners(alpha)
    if alpha == 1:
        return basis.j1, basis.j2
    if alpha == 2:
        return basis.j2, basis.j1
    return basis.grid.add_index(basis.j1, basis.j2), basis.j1


def check_channel_coordinates(model: ModelConfig, basis: TripleBasis, alpha: int) -> float:
    """Verify that channel-α coordinates of the basis live on aligned grids.

    Within every spectator block p must be constant and q must differ from the
    relative grid point by a constant, which makes V_α act as the grid kernel.

    Returns:
        float: Largest deviation found.

    Raises:
        IncompatibleDiscretizationError: If the deviation exceeds the fiber tolerance.
    """
    beta, gamma = channel_partners(alpha)
    spectator, relative = channel_labels(basis, alpha)
    q, p = split_three(basis.K, *basis.momenta(), model.derived, alpha)
    sign = 1.0 if beta < gamma else -1.0
    offset = normalize(q - sign * basis.grid.points[relative])
    _, first, inverse = np.unique(spectator, return_index=True, return_inverse=True)
    reference = first[inverse]
    deviation = max(torus_distance(offset, offset[reference]), torus_distance(p, p[reference]))
    if deviation > NUMERICAL_SETTINGS["fiber_tol"]:
        logger.error(f"Channel {alpha} coordinates leave the grid (deviation {deviation:.3e})")
        raise IncompatibleDiscretizationError(
            f"channel {alpha} coordinates are not grid-aligned for masses {model.derived.masses} "
            f"on n={basis.grid.n} (deviation {deviation:.3e})"
        )
    return deviation


def _block_permutation(spectator: npt.NDArray[np.int64], relative: npt.NDArray[np.int64]) -> npt.NDArray[np.int64]:
    # position spectator·n³ + relative in the block-sorted order maps back to the state index
    return np.lexsort((relative, spectator))


def channel_potential_operator(
    model: ModelConfig, basis: TripleBasis, alpha: int, potential: Optional[LatticeCoefficients] = None
) -> scipy.sparse.coo_matrix:
    """Sparse V_α on the triple basis: the grid kernel inside each spectator block."""
    potential = model.potential(alpha) if potential is None else potential
    check_channel_coordinates(model, basis, alpha)
    spectator, relative = channel_labels(basis, alpha)
    order = _block_permutation(spectator, relative)
    size = basis.grid.size
    blocks = scipy.sparse.kron(
        scipy.sparse.identity(size, format="csr"),
        scipy.sparse.csr_matrix(potential_matrix(potential, basis.grid.n))
    ).tocoo()
    return scipy.sparse.coo_matrix(
        (blocks.data, (order[blocks.row], order[blocks.col])), shape=(basis.size, basis.size)
    )


def channel_projection(
    basis: TripleBasis, alpha: int, range_basis: Matrix
) -> scipy.sparse.csr_matrix:
    """Orthonormal P_α with columns (spectator, mode): Q[relative, mode] in each block."""
    spectator, relative = channel_labels(basis, alpha)
    rank = range_basis.shape[1]
    rows = np.repeat(np.arange(basis.size), rank)
    cols = (spectator[:, None] * rank + np.arange(rank)[None, :]).ravel()
    data = range_basis[relative].ravel()
    return scipy.sparse.csr_matrix((data, (rows, cols)), shape=(basis.size, basis.grid.size * rank))


def _work_model(model: ModelConfig, potentials: Optional[Triple]) -> ModelConfig:
    return model if potentials is None else model.with_potentials(potentials)


def _check_cap(grid: TorusGrid, cap: int, what: str) -> None:
    if grid.n > cap:
        raise PreconditionError(f"{what} is capped at n={cap}, got n={grid.n}")


def potential_norm(model: ModelConfig) -> float:
    """max_α Σ_s v̂_α(s), an upper bound for every ‖V_α‖."""
    return max(float(np.sum(model.potential(a).values)) for a in (1, 2, 3))


def total_symbol_values(model: ModelConfig, K: npt.ArrayLike, grid: TorusGrid) -> npt.NDArray[np.float64]:
    """Total symbol at every state of the triple basis on ``grid``."""
    return triple_basis(grid, K).kinetic(model)


def three_body_band(model: ModelConfig, K: npt.ArrayLike, grid: TorusGrid) -> ThreeBodyBand:
    """[E_min(K), E_max(K)] by grid search over all triples, refined by BFGS in (q, p).

    Args:
        model: Validated model.
        K: Total momentum.
        grid: Grid for both independent momenta.

    Returns:
        ThreeBodyBand: Never narrower than the grid values.
    """
    K = normalize(K)
    points = grid.points
    best = {"lo": (np.inf, None), "hi": (-np.inf, None)}
    eps1 = np.asarray(eval_dispersion(model.dispersion(1), points))
    eps2 = np.asarray(eval_dispersion(model.dispersion(2), points))
    for j1 in range(grid.size):
        k3 = normalize(K - points[j1] - points)
        values = eps1[j1] + eps2 + np.asarray(eval_dispersion(model.dispersion(3), k3))
        i_lo, i_hi = int(np.argmin(values)), int(np.argmax(values))
        if values[i_lo] < best["lo"][0]:
            best["lo"] = (float(values[i_lo]), (j1, i_lo))
        if values[i_hi] > best["hi"][0]:
            best["hi"] = (float(values[i_hi]), (j1, i_hi))

    def fun(x: npt.NDArray[np.float64]) -> float:
        return float(total_symbol(model, K, x[:3], x[3:]))

    def jac(x: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        return np.concatenate(total_symbol_gradient(model, K, x[:3], x[3:]))

    def start(j1: int, j2: int) -> npt.NDArray[np.float64]:
        k1, k2 = points[j1], points[j2]
        q, p = split_three(K, k1, k2, normalize(K - k1 - k2), model.derived, 1)
        return np.concatenate([q, p])

    lo, _, _ = refine_extremum(fun, jac, start(*best["lo"][1]))
    hi, _, _ = refine_extremum(fun, jac, start(*best["hi"][1]), maximize=True)
    result = ThreeBodyBand(min(lo, best["lo"][0]), max(hi, best["hi"][0]))
    logger.debug(f"Three-body band at K={K.tolist()} on n={grid.n}: [{result.lo:.10g}, {result.hi:.10g}]")
    return result


def essential_spectrum(
    model: ModelConfig,
    K: npt.ArrayLike,
    grid: TorusGrid,
    potentials: Optional[Triple] = None,
    gap_tol: Optional[float] = None,
    threads: Optional[int] = None,
    solver: Optional[str] = None
) -> EssentialSpectrum:
    """Union of the three channel spectra and the three-body band.

    Args:
        model: Validated model.
        K: Total momentum.
        grid: Base grid for spectator and relative momenta.
        potentials: Override of the three pair potentials.
        gap_tol: Merge tolerance; defaults per channel to the sampled spacing.
        threads: Worker cap for the p-sweeps.
        solver: Two-body solver for the fibers.

    Returns:
        EssentialSpectrum: Merged union and per-channel parts.
    """
    work = _work_model(model, potentials)
    K = normalize(K)
    band_ = three_body_band(work, K, grid)
    channels = tuple(
        analyze_channel(work, alpha, K, grid, gap_tol=gap_tol, threads=threads, solver=solver, three_band=band_)
        for alpha in (1, 2, 3)
    )
    tol = max(c.gap_tol for c in channels)
    union = IntervalUnion(((band_.lo, band_.hi),))
    for c in channels:
        union = union.union(c.union, gap_tol=tol)
    logger.info(f"Essential spectrum at K={K.tolist()} (n={grid.n}): {union.to_list()}")
    return EssentialSpectrum(tuple(float(v) for v in K), union, channels, band_, tol)  # type: ignore[arg-type]


def build_full_H(
    model: ModelConfig,
    K: npt.ArrayLike,
    coarse_grid: TorusGrid,
    potentials: Optional[Triple] = None,
    max_n: Optional[int] = None
) -> SymmetricOperatorMatrix:
    """Dense H(K) = H₀(K) − V₁ − V₂ − V₃ on the momentum-triple basis.

    Args:
        model: Validated model.
        K: Total momentum.
        coarse_grid: Grid of each independent momentum; dimension is n⁶.
        potentials: Override of the three pair potentials.
        max_n: Resolution cap; defaults to the configured one.

    Returns:
        SymmetricOperatorMatrix: Matrix of order 2 over ``coarse_grid``.

    Raises:
        PreconditionError: If the grid exceeds the cap.
        IncompatibleDiscretizationError: If channel coordinates leave the grid.
    """
    _check_cap(coarse_grid, THREE_BODY_SETTINGS["full_h_max_n"] if max_n is None else max_n, "full H(K)")
    work = _work_model(model, potentials)
    basis = triple_basis(coarse_grid, K)
    entries = np.diag(basis.kinetic(work))
    for alpha in (1, 2, 3):
        if len(work.potential(alpha)) == 0:
            continue
        v = channel_potential_operator(work, basis, alpha)
        entries[v.row, v.col] -= v.data
    logger.info(f"Built full H(K) of dimension {basis.size} at K={basis.K.tolist()}")
    return SymmetricOperatorMatrix(entries, coarse_grid, order=2)


def continuum_delta(model: ModelConfig, K: npt.ArrayLike, coarse_grid: TorusGrid) -> float:
    """δ_band of the three-body grid: the largest gap between sorted total-symbol values.

    Eigenvalues of the grid H(K) closer than this to the essential union are not
    resolved from it; :func:`oracle_compare` and :func:`faddeev_eigenvalue_scan`
    both classify against ``union.lo − δ``.
    """
    return symbol_gap(triple_basis(coarse_grid, K).kinetic(model))


def _classify(eigenvalues: npt.NDArray[np.float64], reference: IntervalUnion, delta: float, label: str) -> ComparisonReport:
    widened = reference.widened(delta)
    inside, below, gap, above = 0, [], [], []
    for value in eigenvalues:
        value = float(value)
        if widened.contains(value):
            inside += 1
        elif value < widened.lo:
            below.append(value)
        elif value > widened.hi:
            above.append(value)
        else:
            gap.append(value)
    return ComparisonReport(
        label, int(eigenvalues.size), delta, inside, tuple(below), tuple(gap), tuple(above)
    )


def oracle_compare(
    model: ModelConfig,
    K: npt.ArrayLike,
    coarse_grid: TorusGrid,
    potentials: Optional[Triple] = None,
    delta: Optional[float] = None,
    gap_tol: Optional[float] = None,
    threads: Optional[int] = None
) -> ComparisonReport:
    """Diagonalize the coarse H(K) and classify its eigenvalues against Σ(K).

    Args:
        delta: Containment widening; defaults to :func:`continuum_delta`.

    Returns:
        ComparisonReport: Inside, isolated and violating eigenvalues.
    """
    work = _work_model(model, potentials)
    h = build_full_H(work, K, coarse_grid)
    eigenvalues = h.eigenvalues("lapack")
    essential = essential_spectrum(work, K, coarse_grid, gap_tol=gap_tol, threads=threads, solver="dense")
    delta = continuum_delta(work, K, coarse_grid) if delta is None else delta
    report = _classify(eigenvalues, essential.union, delta, "oracle")
    logger.info(
        f"Oracle at K={normalize(K).tolist()}: containment {report.containment_fraction:.6f}, "
        f"{len(report.isolated)} isolated, {len(report.violations)} violation(s)"
    )
    return report


@dataclass(frozen=True, eq=False)
class FaddeevOperator:
    """Compressed Faddeev operator T̃(K, z).

    Attributes:
        z: Spectral parameter.
        blocks: 3×3 blocks T̃_αβ; diagonal blocks are zero.
        ranks: Compressed dimension of each channel.
        condition_numbers: Condition numbers of I − A_αα.
    """

    z: float
    blocks: Tuple[Tuple[Matrix, ...], ...]
    ranks: Tuple[int, int, int]
    condition_numbers: Tuple[float, float, float]
    full_dim: int = field(default=0)

    def matrix(self) -> Matrix:
        return np.block([list(row) for row in self.blocks]) if sum(self.ranks) else np.zeros((0, 0))

    def block_norms(self) -> npt.NDArray[np.float64]:
        return np.array([[np.linalg.norm(b) for b in row] for row in self.blocks])

    def smallest_singular_value(self) -> float:
        """σ_min(I − T); compressed directions beyond the ranks contribute ones."""
        dim = sum(self.ranks)
        if dim == 0:
            return 1.0
        value = smallest_singular_value(np.eye(dim) - self.matrix())
        return min(value, 1.0) if dim < 3 * self.full_dim else value


class FaddeevAssembler:
    """Precomputed pieces of T̃(K, z) for one model, K and grid.

    The triple basis, the kinetic diagonal and the channel projections do not
    depend on z, so a z-sweep reuses them.
    """

    def __init__(
        self,
        model: ModelConfig,
        K: npt.ArrayLike,
        coarse_grid: TorusGrid,
        potentials: Optional[Triple] = None,
        max_n: Optional[int] = None
    ) -> None:
        _check_cap(coarse_grid, THREE_BODY_SETTINGS["faddeev_max_n"] if max_n is None else max_n, "Faddeev operator")
        self.model = _work_model(model, potentials)
        self.grid = coarse_grid
        self.basis = triple_basis(coarse_grid, K)
        self.kinetic = self.basis.kinetic(self.model)
        self.band = three_body_band(self.model, self.basis.K, coarse_grid)
        self.projections: List[scipy.sparse.csr_matrix] = []
        self.roots: List[npt.NDArray[np.float64]] = []
        for alpha in (1, 2, 3):
            potential = self.model.potential(alpha)
            basis_q, values = potential_factor(potential, coarse_grid.n, sqrt=True)
            if values.size:
                check_channel_coordinates(self.model, self.basis, alpha)
                self._warn_on_aliasing(potential, alpha)
            self.projections.append(channel_projection(self.basis, alpha, basis_q))
            self.roots.append(np.tile(values, coarse_grid.size))

    def _warn_on_aliasing(self, potential: LatticeCoefficients, alpha: int) -> None:
        root = potential_matrix(potential, self.grid.n, sqrt=True)
        defect = float(np.max(np.abs(root @ root - potential_matrix(potential, self.grid.n))))
        if defect > 1e-10:
            logger.warning(
                f"Square-root kernel of channel {alpha} does not square to the potential on n={self.grid.n} "
                f"(defect {defect:.3e}); the support aliases modulo n"
            )

    def _coupling(self, resolvent: npt.NDArray[np.float64], alpha: int, beta: int) -> Matrix:
        left, right = self.projections[alpha - 1], self.projections[beta - 1]
        core = (left.T @ (scipy.sparse.diags(resolvent) @ right)).toarray()
        return self.roots[alpha - 1][:, None] * core * self.roots[beta - 1][None, :]

    def operator(self, z: float) -> FaddeevOperator:
        """Assemble T̃(K, z).

        Raises:
            OutOfDomainError: If ``z ≥ E_min(K)``.
            ChannelSpectrumError: If z lies in (or on) a channel spectrum.
        """
        if z >= self.band.lo:
            raise OutOfDomainError(f"z={z} is not below the three-body band edge {self.band.lo}")
        resolvent = 1.0 / (self.kinetic - z)
        ranks = tuple(int(r.size) for r in self.roots)
        solved: Dict[int, Tuple[Matrix, float]] = {}
        couplings = {
            (a, b): self._coupling(resolvent, a, b) for a in (1, 2, 3) for b in (1, 2, 3) if ranks[a - 1] and ranks[b - 1]
        }
        for alpha in (1, 2, 3):
            if not ranks[alpha - 1]:
                solved[alpha] = (np.zeros((0, 0)), 1.0)
                continue
            diagonal = couplings[(alpha, alpha)]
            top = float(symmetric_eigvalsh(0.5 * (diagonal + diagonal.T))[-1])
            denominator = np.eye(ranks[alpha - 1]) - diagonal
            condition = float(np.linalg.cond(denominator))
            if top >= 1.0 - 1e-12 or condition > THREE_BODY_SETTINGS["singular_cond"]:
                raise ChannelSpectrumError(
                    f"z={z} lies in the spectrum of channel {alpha} "
                    f"(largest Birman-Schwinger eigenvalue {top:.6g}, condition {condition:.3e})"
                )
            solved[alpha] = (denominator, condition)

        blocks = []
        for alpha in (1, 2, 3):
            row = []
            for beta in (1, 2, 3):
                shape = (ranks[alpha - 1], ranks[beta - 1])
                if alpha == beta or not (shape[0] and shape[1]):
                    row.append(np.zeros(shape))
                else:
                    row.append(scipy.linalg.solve(solved[alpha][0], couplings[(alpha, beta)], assume_a="pos"))
            blocks.append(tuple(row))
        conditions = tuple(solved[a][1] for a in (1, 2, 3))
        return FaddeevOperator(float(z), tuple(blocks), ranks, conditions, self.basis.size)  # type: ignore[arg-type]

    def resolvent(self, z: float) -> Matrix:
        """Full (H(K) − z)⁻¹ recovered from the Faddeev solution."""
        op = self.operator(z)
        r0 = 1.0 / (self.kinetic - z)
        ranks = op.ranks
        if sum(ranks) == 0:
            return np.diag(r0)
        sources = []
        for alpha in (1, 2, 3):
            if not ranks[alpha - 1]:
                continue
            projection = self.projections[alpha - 1]
            rhs = self.roots[alpha - 1][:, None] * (projection.T @ scipy.sparse.diags(r0)).toarray()
            denominator = np.eye(ranks[alpha - 1]) - self._coupling(r0, alpha, alpha)
            sources.append(scipy.linalg.solve(denominator, rhs, assume_a="pos"))
        stacked = scipy.linalg.solve(np.eye(sum(ranks)) - op.matrix(), np.vstack(sources))
        correction = np.zeros((self.basis.size, self.basis.size))
        offset = 0
        for alpha in (1, 2, 3):
            rank = ranks[alpha - 1]
            if not rank:
                continue
            part = stacked[offset:offset + rank]
            correction += self.projections[alpha - 1] @ (self.roots[alpha - 1][:, None] * part)
            offset += rank
        return np.diag(r0) + r0[:, None] * correction


def faddeev_operator(
    model: ModelConfig,
    K: npt.ArrayLike,
    z: float,
    coarse_grid: TorusGrid,
    potentials: Optional[Triple] = None
) -> FaddeevOperator:
    """T(K, z) in compressed form (see :class:`FaddeevAssembler`)."""
    return FaddeevAssembler(model, K, coarse_grid, potentials).operator(z)


def faddeev_resolvent(
    model: ModelConfig,
    K: npt.ArrayLike,
    z: float,
    coarse_grid: TorusGrid,
    potentials: Optional[Triple] = None
) -> Matrix:
    """(H(K) − z)⁻¹ reconstructed through the Faddeev equations (full-H cap applies)."""
    _check_cap(coarse_grid, THREE_BODY_SETTINGS["full_h_max_n"], "Faddeev resolvent")
    return FaddeevAssembler(model, K, coarse_grid, potentials).resolvent(z)


def channel_threshold(
    model: ModelConfig,
    K: npt.ArrayLike,
    grid: TorusGrid,
    potentials: Optional[Triple] = None,
    threads: Optional[int] = None
) -> float:
    """Bottom of the essential spectrum on ``grid``: min of E_min(K) and all σ_two samples."""
    essential = essential_spectrum(model, K, grid, potentials, threads=threads, solver="dense" if grid.n <= 6 else None)
    return essential.union.lo


@dataclass(frozen=True)
class FaddeevScan:
    """Smallest singular values of I − T along a z-sweep.

    Attributes:
        samples: ``(z, σ_min)`` pairs in sweep order.
        candidates: Refined zeros of σ_min below ``channel_threshold − delta``.
        threshold: Candidate threshold on σ_min.
        channel_threshold: Bottom of the essential spectrum used as the bound.
        delta: Continuum widening shared with :func:`oracle_compare`.
        edge_zeros: Refined zeros within ``delta`` of the essential spectrum.
    """

    samples: Tuple[Tuple[float, float], ...]
    candidates: Tuple[float, ...]
    threshold: float
    channel_threshold: float
    delta: float = 0.0
    edge_zeros: Tuple[float, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "samples": [list(s) for s in self.samples],
            "candidates": list(self.candidates),
            "threshold": self.threshold,
            "channel_threshold": self.channel_threshold,
            "delta": self.delta,
            "edge_zeros": list(self.edge_zeros)
        }


def faddeev_eigenvalue_scan(
    model: ModelConfig,
    K: npt.ArrayLike,
    z_values: Sequence[float],
    coarse_grid: TorusGrid,
    potentials: Optional[Triple] = None,
    threshold: Optional[float] = None,
    threads: Optional[int] = None,
    delta: Optional[float] = None
) -> FaddeevScan:
    """σ_min(I − T(K, z)) over a z-sweep, with refined near-zero local minima.

    Args:
        z_values: Sweep points, all below the essential spectrum.
        threshold: σ_min level below which a refined minimum is a zero.
        delta: Continuum widening; defaults to :func:`continuum_delta`. Zeros
            closer than this to the essential spectrum are reported as edge
            zeros, not candidates.

    Returns:
        FaddeevScan: Samples and candidate eigenvalues.

    Raises:
        PreconditionError: If a sweep point is not below the essential spectrum.
    """
    threshold = THREE_BODY_SETTINGS["candidate_threshold"] if threshold is None else threshold
    zs = np.sort(np.asarray(z_values, dtype=float))
    if zs.size == 0:
        raise PreconditionError("empty z-sweep")
    assembler = FaddeevAssembler(model, K, coarse_grid, potentials)
    bound = channel_threshold(assembler.model, K, coarse_grid, threads=threads)
    delta = symbol_gap(assembler.kinetic) if delta is None else delta
    if zs[-1] >= bound:
        raise PreconditionError(f"z-sweep reaches {zs[-1]}, not below the essential spectrum bottom {bound}")

    def sigma(z: float) -> float:
        return assembler.operator(float(z)).smallest_singular_value()

    values = np.asarray(parallel_map(sigma, zs.tolist(), threads))
    candidates: List[float] = []
    edge_zeros: List[float] = []
    for i in range(zs.size):
        left = values[i - 1] if i > 0 else np.inf
        right = values[i + 1] if i + 1 < zs.size else np.inf
        if values[i] >= 1.0 or not (values[i] <= left and values[i] <= right):
            continue
        lo, hi = zs[max(i - 1, 0)], zs[min(i + 1, zs.size - 1)]
        if hi > lo:
            result = scipy.optimize.minimize_scalar(sigma, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
            z_star, s_star = float(result.x), float(result.fun)
        else:
            z_star, s_star = float(zs[i]), float(values[i])
        if s_star < threshold:
            (candidates if z_star < bound - delta else edge_zeros).append(z_star)
    logger.info(
        f"Faddeev scan over {zs.size} points: {len(candidates)} candidate(s) {candidates}, "
        f"{len(edge_zeros)} zero(s) within {delta:.6g} of the essential spectrum"
    )
    return FaddeevScan(
        tuple((float(z), float(s)) for z, s in zip(zs, values)), tuple(candidates), threshold, bound,
        delta, tuple(edge_zeros)
    )


def fiber_equivalence_test(
    model: ModelConfig,
    alpha: int,
    coarse_grid: TorusGrid,
    potential: Optional[LatticeCoefficients] = None,
    max_n: Optional[int] = None
) -> ComparisonReport:
    """Compare the full two-particle operator with the union of its fibers.

    The full operator lives on the (k_β, k_γ) product grid; the potential only
    couples pairs with the same total momentum. Its eigenvalue multiset must
    equal the union over the n³ total momenta k of the spectra of
    :func:`build_h_matrix`.

    Returns:
        ComparisonReport: ``max_deviation`` and ``block_count`` filled in.
    """
    _check_cap(coarse_grid, THREE_BODY_SETTINGS["full_h_max_n"] if max_n is None else max_n, "fiber equivalence")
    potential = model.potential(alpha) if potential is None else potential
    beta, gamma = channel_partners(alpha)
    size = coarse_grid.size
    states = np.arange(size, dtype=np.int64)
    j_beta, j_gamma = np.repeat(states, size), np.tile(states, size)
    points = coarse_grid.points
    diagonal = (
        np.asarray(eval_dispersion(model.dispersion(beta), points[j_beta]))
        + np.asarray(eval_dispersion(model.dispersion(gamma), points[j_gamma]))
    )
    total = coarse_grid.add_index(j_beta, j_gamma)
    relative = j_beta if beta < gamma else j_gamma
    order = _block_permutation(total, relative)
    blocks = scipy.sparse.kron(
        scipy.sparse.identity(size, format="csr"), scipy.sparse.csr_matrix(potential_matrix(potential, coarse_grid.n))
    ).tocoo()
    full = np.diag(diagonal)
    full[order[blocks.row], order[blocks.col]] -= blocks.data
    full_eigenvalues = symmetric_eigvalsh(full, "lapack")

    fiber_eigenvalues = np.sort(np.concatenate([
        build_h_matrix(model, alpha, points[t], aligned_fiber_grid(coarse_grid, model, alpha, points[t]), potential)
        .eigenvalues()
        for t in range(size)
    ]))
    deviation = float(np.max(np.abs(full_eigenvalues - fiber_eigenvalues)))
    logger.info(f"Fiber equivalence for channel {alpha} on n={coarse_grid.n}: max deviation {deviation:.3e}")
    return ComparisonReport(
        "fiber-equivalence", int(full_eigenvalues.size), max_deviation=deviation, block_count=size,
        inside=int(full_eigenvalues.size)
    )
