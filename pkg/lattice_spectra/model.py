"""Model definition and validation for lattice three-particle systems.

This module holds the hopping tables of the dispersion functions ε_α, the pair
potentials v_α, the derived masses and mass ratios, and the coordinate maps
between the momentum triple (k₁, k₂, k₃) and the channel coordinates
(q_α, p_α) at fixed total momentum K.

Channels are numbered 1, 2, 3. Channel α is the pair of the two other particles
(β, γ), taken in cyclic order: 1 ↦ (2, 3), 2 ↦ (3, 1), 3 ↦ (1, 2).
"""
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from lattice_spectra.config import MODEL_SETTINGS, NUMERICAL_SETTINGS
from lattice_spectra.exceptions import (
    DegenerateDispersionError,
    InvalidMassError,
    InvalidResolutionError,
    ModelValidationError,
    NotOnFiberError,
    PreconditionError,
)
from lattice_spectra.torus import TorusPoint, normalize, torus_add, torus_distance

logger = logging.getLogger(__name__)

Lattice = Tuple[int, int, int]
RealOrArray = Union[float, npt.NDArray[np.float64]]

FOURIER_PREFACTOR = (2.0 * np.pi) ** -1.5


def _collapse(values: npt.NDArray[np.float64]) -> RealOrArray:
    return float(values) if np.ndim(values) == 0 else values


@dataclass(frozen=True)
class LatticeCoefficients:
    """Finitely supported real map s ∈ Z³ ↦ coefficient.

    Entries are kept sorted with zero values dropped, so two tables with the
    same nonzero coefficients compare (and hash) equal.

    Attributes:
        entries: Sorted ``((s1, s2, s3), value)`` pairs.
    """

    entries: Tuple[Tuple[Lattice, float], ...] = ()

    @classmethod
    def from_mapping(cls, mapping: Mapping[Sequence[int], float]) -> "LatticeCoefficients":
        """Build a table from a mapping of lattice vectors to values.

        Args:
            mapping: Keys are length-3 integer sequences; repeated keys add up.

        Returns:
            LatticeCoefficients: The canonical table.

        Raises:
            ValueError: If a key is not a 3-vector.
        """
        cleaned: Dict[Lattice, float] = {}
        for s, value in mapping.items():
            key = tuple(int(v) for v in s)
            if len(key) != 3:
                raise ValueError(f"lattice vectors need 3 components, got {s!r}")
            cleaned[key] = cleaned.get(key, 0.0) + float(value)
        return cls(tuple(sorted((s, v) for s, v in cleaned.items() if v != 0.0)))

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[float]]) -> "LatticeCoefficients":
        """Build a table from ``(s1, s2, s3, value)`` rows."""
        mapping: Dict[Lattice, float] = {}
        for row in rows:
            s = (int(row[0]), int(row[1]), int(row[2]))
            mapping[s] = mapping.get(s, 0.0) + float(row[3])
        return cls.from_mapping(mapping)

    def entry(self, s: Sequence[int]) -> float:
        key = tuple(int(v) for v in s)
        return self._lookup.get(key, 0.0)

    @cached_property
    def _lookup(self) -> Dict[Lattice, float]:
        return dict(self.entries)

    @property
    def support_radius(self) -> int:
        """Largest |s|₁ over the support, 0 for an empty table."""
        return max((sum(abs(v) for v in s) for s, _ in self.entries), default=0)

    @cached_property
    def shifts(self) -> npt.NDArray[np.float64]:
        return np.array([s for s, _ in self.entries], dtype=float).reshape(-1, 3)

    @cached_property
    def values(self) -> npt.NDArray[np.float64]:
        return np.array([v for _, v in self.entries], dtype=float)

    def scaled(self, t: float) -> "LatticeCoefficients":
        return LatticeCoefficients.from_mapping({s: t * v for s, v in self.entries})

    def to_rows(self) -> List[List[float]]:
        return [[s[0], s[1], s[2], v] for s, v in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def nearest_neighbor_dispersion(hopping: float = 0.5) -> LatticeCoefficients:
    """Nearest-neighbour hopping table normalized so that ε(0) = 0.

    With the default hopping 1/2 the effective mass is 1 and ε ranges over [0, 6].
    """
    mapping: Dict[Lattice, float] = {(0, 0, 0): 6.0 * hopping}
    for s in lattice_sphere(1):
        mapping[s] = -hopping
    return LatticeCoefficients.from_mapping(mapping)


def zero_range_potential(mu: float) -> LatticeCoefficients:
    return LatticeCoefficients.from_mapping({(0, 0, 0): mu})


def lattice_sphere(radius: int) -> List[Lattice]:
    """All s ∈ Z³ with |s|₁ = radius, in lexicographic order."""
    if radius < 0:
        return []
    points = []
    for s1 in range(-radius, radius + 1):
        rest = radius - abs(s1)
        for s2 in range(-rest, rest + 1):
            s3 = rest - abs(s2)
            points.extend(sorted({(s1, s2, s3), (s1, s2, -s3)}))
    return sorted(points)


@dataclass(frozen=True)
class ClauseResult:
    clause: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    """Pass/fail record of every hypothesis clause checked for one table.

    Attributes:
        subject: What was validated, e.g. ``"dispersion 2"``.
        clauses: One result per clause, in a fixed order.
    """

    subject: str
    clauses: Tuple[ClauseResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def failed(self) -> List[ClauseResult]:
        return [c for c in self.clauses if not c.passed]

    def raise_for_failure(self) -> None:
        """Raise :class:`ModelValidationError` naming the first failed clause."""
        failures = self.failed()
        if failures:
            raise ModelValidationError(self.subject, failures[0].clause, failures[0].detail)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "subject": self.subject,
            "passed": self.passed,
            "clauses": [
                {"clause": c.clause, "passed": c.passed, "detail": c.detail} for c in self.clauses
            ]
        }


def _decay_clause(prefix: str, c: LatticeCoefficients, max_support_radius: int) -> ClauseResult:
    radius = c.support_radius
    return ClauseResult(
        f"{prefix}.decay",
        radius <= max_support_radius,
        f"finite support of radius {radius} (limit {max_support_radius})"
    )


def validate_dispersion(
    c: LatticeCoefficients,
    subject: str = "dispersion",
    max_support_radius: Optional[int] = None
) -> ValidationReport:
    """Check a hopping table against the dispersion hypotheses.

    Clauses, in order:

    * ``dispersion.radial``: ε̂(s) depends only on |s|₁.
    * ``dispersion.decay``: the support radius is within the configured limit.
    * ``dispersion.sign``: ε̂(s) < 0 for |s|₁ = 1 and ε̂(s) ≤ 0 for |s|₁ > 1.

    Args:
        c: Hopping table.
        subject: Label carried into the report.
        max_support_radius: Truncation limit; defaults to the configured one.

    Returns:
        ValidationReport: Per-clause results; never raises.
    """
    limit = MODEL_SETTINGS["max_support_radius"] if max_support_radius is None else max_support_radius
    tol = MODEL_SETTINGS["radial_tol"]

    radial_failures = []
    for radius in sorted({sum(abs(v) for v in s) for s, _ in c.entries}):
        shell = [c.entry(s) for s in lattice_sphere(radius)]
        scale = max(1.0, max(abs(v) for v in shell))
        if max(shell) - min(shell) > tol * scale:
            radial_failures.append(radius)
    radial = ClauseResult(
        "dispersion.radial",
        not radial_failures,
        f"coefficients vary on shells |s|={radial_failures}" if radial_failures else ""
    )

    sign_failures = [s for s in lattice_sphere(1) if not c.entry(s) < 0.0]
    sign_failures += [s for s, v in c.entries if sum(abs(x) for x in s) > 1 and v > 0.0]
    sign = ClauseResult(
        "dispersion.sign",
        not sign_failures,
        f"wrong sign at {sign_failures[:4]}" if sign_failures else ""
    )
    return ValidationReport(subject, (radial, _decay_clause("dispersion", c, limit), sign))


def validate_potential(
    c: LatticeCoefficients,
    subject: str = "potential",
    max_support_radius: Optional[int] = None
) -> ValidationReport:
    """Check a potential table: nonnegative, even and finitely supported."""
    limit = MODEL_SETTINGS["max_support_radius"] if max_support_radius is None else max_support_radius
    negative = [s for s, v in c.entries if v < 0.0]
    odd = [s for s, v in c.entries if c.entry(tuple(-x for x in s)) != v]
    return ValidationReport(subject, (
        ClauseResult(
            "potential.nonnegative", not negative,
            f"negative at {negative[:4]}" if negative else ""
        ),
        ClauseResult("potential.even", not odd, f"v(s) != v(-s) at {odd[:4]}" if odd else ""),
        _decay_clause("potential", c, limit)
    ))


def _cos_factors(c: LatticeCoefficients, p: npt.NDArray[np.float64]) -> Iterable[Tuple[float, Lattice, Any, Any]]:
    for s, value in c.entries:
        angles = [s[i] * p[..., i] for i in range(3)]
        yield value, s, [np.cos(a) for a in angles], [np.sin(a) for a in angles]


def eval_dispersion(c: LatticeCoefficients, p: npt.ArrayLike) -> RealOrArray:
    """Evaluate ε(p) = Σ_s ε̂(s)·cos(s₁p₁)cos(s₂p₂)cos(s₃p₃).

    Args:
        c: Hopping table (radial, hence even).
        p: Point(s) with last axis of length 3.

    Returns:
        RealOrArray: A float for a single point, otherwise an array over the
        leading axes of ``p``.
    """
    points = np.asarray(p, dtype=float)
    result = np.zeros(points.shape[:-1])
    for value, _, cos, _ in _cos_factors(c, points):
        result = result + value * cos[0] * cos[1] * cos[2]
    return _collapse(result)


def dispersion_gradient(c: LatticeCoefficients, p: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Analytic gradient of :func:`eval_dispersion`, shape ``p.shape``."""
    points = np.asarray(p, dtype=float)
    grad = np.zeros(points.shape)
    for value, s, cos, sin in _cos_factors(c, points):
        grad[..., 0] -= value * s[0] * sin[0] * cos[1] * cos[2]
        grad[..., 1] -= value * s[1] * cos[0] * sin[1] * cos[2]
        grad[..., 2] -= value * s[2] * cos[0] * cos[1] * sin[2]
    return grad


def dispersion_hessian(c: LatticeCoefficients, p: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Analytic Hessian of :func:`eval_dispersion`, shape ``p.shape + (3,)``."""
    points = np.asarray(p, dtype=float)
    hess = np.zeros(points.shape + (3,))
    for value, s, cos, sin in _cos_factors(c, points):
        for i in range(3):
            others = [j for j in range(3) if j != i]
            hess[..., i, i] -= value * s[i] ** 2 * cos[i] * cos[others[0]] * cos[others[1]]
            for j in others:
                k = 3 - i - j
                hess[..., i, j] += value * s[i] * s[j] * sin[i] * sin[j] * cos[k]
    return hess


def dispersion_hessian_at_zero(c: LatticeCoefficients) -> npt.NDArray[np.float64]:
    """Hessian of ε at p = 0; off-diagonal entries vanish identically."""
    return dispersion_hessian(c, np.zeros(3))


def effective_mass(c: LatticeCoefficients) -> float:
    """Effective mass 3·(−Σ_s |s|²·ε̂(s))⁻¹ with |s|² the Euclidean square.

    Raises:
        DegenerateDispersionError: If the curvature sum is not positive.
    """
    denominator = -float(np.sum(np.sum(c.shifts ** 2, axis=1) * c.values)) if len(c) else 0.0
    if denominator <= 0.0:
        raise DegenerateDispersionError(
            f"dispersion has no positive curvature at 0 (curvature sum {denominator})"
        )
    return 3.0 / denominator


def hessian_mass_defect(c: LatticeCoefficients) -> float:
    """Largest entry of |Hessian(0) − (1/m)·I|; zero for radial tables."""
    hess = dispersion_hessian_at_zero(c)
    return float(np.max(np.abs(hess - np.eye(3) / effective_mass(c))))


def _fourier_sum(
    shifts: npt.NDArray[np.float64], values: npt.NDArray[np.float64], p: npt.ArrayLike
) -> RealOrArray:
    points = np.asarray(p, dtype=float)
    result = np.zeros(points.shape[:-1])
    for s, value in zip(shifts, values):
        result = result + value * np.cos(points @ s)
    return _collapse(FOURIER_PREFACTOR * result)


def eval_potential(c: LatticeCoefficients, p: npt.ArrayLike) -> RealOrArray:
    """Evaluate v(p) = (2π)^{−3/2}·Σ_s v̂(s)·cos(p·s) for an even table."""
    return _fourier_sum(c.shifts, c.values, p)


def potential_sqrt_kernel(c: LatticeCoefficients, p: npt.ArrayLike) -> RealOrArray:
    """Fourier series of √v̂(s), with the same (2π)^{−3/2} prefactor."""
    if np.any(c.values < 0.0):
        raise ModelValidationError("potential", "potential.nonnegative", "square root of a negative entry")
    return _fourier_sum(c.shifts, np.sqrt(c.values), p)


@dataclass(frozen=True)
class MassData:
    """Effective masses and the ratios derived from them.

    Attributes:
        masses: (m₁, m₂, m₃).
    """

    masses: Tuple[float, float, float]

    @property
    def total(self) -> float:
        return float(sum(self.masses))

    @property
    def l_single(self) -> Tuple[float, float, float]:
        """(l₁, l₂, l₃) with l_α = m_α/M."""
        return tuple(m / self.total for m in self.masses)  # type: ignore[return-value]

    def l_of(self, alpha: int) -> float:
        return self.masses[alpha - 1] / self.total

    def l_pair(self, beta: int, gamma: int) -> float:
        """l_βγ = m_γ/(m_β + m_γ)."""
        m_beta, m_gamma = self.masses[beta - 1], self.masses[gamma - 1]
        return m_gamma / (m_beta + m_gamma)

    @property
    def pair_ratios(self) -> Dict[Tuple[int, int], float]:
        """All six l_βγ keyed by (β, γ)."""
        return {(b, g): self.l_pair(b, g) for b in (1, 2, 3) for g in (1, 2, 3) if b != g}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "masses": list(self.masses),
            "total": self.total,
            "l_single": list(self.l_single),
            "l_pair": {f"{b}{g}": v for (b, g), v in sorted(self.pair_ratios.items())}
        }


def mass_ratios(m1: float, m2: float, m3: float) -> MassData:
    """Build :class:`MassData` from three effective masses.

    Raises:
        InvalidMassError: If a mass is not a positive finite number.
    """
    for index, mass in enumerate((m1, m2, m3), start=1):
        if not (math.isfinite(mass) and mass > 0.0):
            raise InvalidMassError(f"mass m{index} must be positive and finite, got {mass}")
    return MassData((float(m1), float(m2), float(m3)))


def channel_partners(alpha: int) -> Tuple[int, int]:
    """The pair (β, γ) of channel α in cyclic order."""
    if alpha not in (1, 2, 3):
        raise PreconditionError(f"channel index must be 1, 2 or 3, got {alpha!r}")
    return (alpha % 3 + 1, (alpha + 1) % 3 + 1)


def _check_fiber(total: TorusPoint, parts: Sequence[npt.ArrayLike], tol: float) -> None:
    acc = np.zeros(np.shape(total))
    for part in parts:
        acc = torus_add(acc, part)
    gap = torus_distance(acc, total)
    if gap > tol:
        raise NotOnFiberError(f"momenta do not add up to the fiber momentum (off by {gap:.3e})")


def split_three(
    K: npt.ArrayLike,
    k1: npt.ArrayLike,
    k2: npt.ArrayLike,
    k3: npt.ArrayLike,
    md: MassData,
    alpha: int,
    tol: Optional[float] = None
) -> Tuple[TorusPoint, TorusPoint]:
    """Map a momentum triple on the fiber K to channel-α coordinates (q, p).

    The relative momenta are anchored on K:

        p = l_α·K − k_α,   q = k_β − l_β·K − l_γβ·p      (all mod 2π)

    which equals q = l_βγ·k_β − l_γβ·k_γ whenever the representatives agree,
    and is exactly inverted by :func:`inverse_split_three` on the torus.

    Raises:
        NotOnFiberError: If k₁ + k₂ + k₃ ≠ K on the torus.
    """
    tol = NUMERICAL_SETTINGS["fiber_tol"] if tol is None else tol
    K = normalize(K)
    ks = [normalize(k) for k in (k1, k2, k3)]
    _check_fiber(K, ks, tol)
    beta, gamma = channel_partners(alpha)
    p = normalize(md.l_of(alpha) * K - ks[alpha - 1])
    q = normalize(ks[beta - 1] - md.l_of(beta) * K - md.l_pair(gamma, beta) * p)
    return q, p


def inverse_split_three(
    K: npt.ArrayLike, q: npt.ArrayLike, p: npt.ArrayLike, md: MassData, alpha: int
) -> Tuple[TorusPoint, TorusPoint, TorusPoint]:
    """Momentum triple (k₁, k₂, k₃) of channel-α coordinates (q, p) at total K."""
    beta, gamma = channel_partners(alpha)
    K, q, p = (np.asarray(v, dtype=float) for v in (K, q, p))
    ks: Dict[int, TorusPoint] = {
        alpha: normalize(md.l_of(alpha) * K - p),
        beta: normalize(md.l_of(beta) * K + md.l_pair(gamma, beta) * p + q),
        gamma: normalize(md.l_of(gamma) * K + md.l_pair(beta, gamma) * p - q)
    }
    return ks[1], ks[2], ks[3]


def split_two(
    k: npt.ArrayLike,
    k_beta: npt.ArrayLike,
    k_gamma: npt.ArrayLike,
    md: MassData,
    alpha: int,
    tol: Optional[float] = None
) -> TorusPoint:
    """Relative momentum q = k_β − l_γβ·k of the pair α at pair momentum k.

    Raises:
        NotOnFiberError: If k_β + k_γ ≠ k on the torus.
    """
    tol = NUMERICAL_SETTINGS["fiber_tol"] if tol is None else tol
    k = normalize(k)
    _check_fiber(k, [k_beta, k_gamma], tol)
    beta, gamma = channel_partners(alpha)
    return normalize(np.asarray(k_beta, dtype=float) - md.l_pair(gamma, beta) * k)


def inverse_split_two(
    k: npt.ArrayLike, q: npt.ArrayLike, md: MassData, alpha: int
) -> Tuple[TorusPoint, TorusPoint]:
    """(k_β, k_γ) = (l_γβ·k + q, l_βγ·k − q)."""
    beta, gamma = channel_partners(alpha)
    k, q = np.asarray(k, dtype=float), np.asarray(q, dtype=float)
    return (
        normalize(md.l_pair(gamma, beta) * k + q),
        normalize(md.l_pair(beta, gamma) * k - q)
    )


def relative_momenta(
    K: npt.ArrayLike, k1: npt.ArrayLike, k2: npt.ArrayLike, k3: npt.ArrayLike, md: MassData
) -> Tuple[TorusPoint, TorusPoint, TorusPoint]:
    """Spectator momenta p_α = l_α·K − k_α of all three channels; they sum to 0."""
    K = np.asarray(K, dtype=float)
    return tuple(  # type: ignore[return-value]
        normalize(md.l_of(a) * K - np.asarray(k, dtype=float)) for a, k in zip((1, 2, 3), (k1, k2, k3))
    )


def coordinate_coefficients(md: MassData, alpha: int, partner: int) -> Tuple[float, float]:
    """Coefficients (d, e) with q_α = d·p_α + e·p_partner on the torus.

    For the cyclic successor β of α the relation is q_α = −(l_γβ·p_α + p_β);
    for the predecessor γ it is q_α = l_βγ·p_α + p_γ.

    Raises:
        PreconditionError: If ``partner`` is ``alpha`` or not a channel index.
    """
    beta, gamma = channel_partners(alpha)
    if partner == beta:
        return -md.l_pair(gamma, beta), -1.0
    if partner == gamma:
        return md.l_pair(beta, gamma), 1.0
    raise PreconditionError(f"partner {partner!r} is not paired with channel {alpha}")


Triple = Tuple[LatticeCoefficients, LatticeCoefficients, LatticeCoefficients]


@dataclass(frozen=True)
class ModelConfig:
    """A validated three-particle lattice model.

    Construction validates every table; an instance therefore always satisfies
    the dispersion and potential hypotheses.

    Attributes:
        dispersions: Hopping tables of particles 1, 2, 3.
        potentials: Potential tables of channels 1, 2, 3 (pairs 23, 31, 12).
        grid_n: Default grid resolution.
        name: Model label used in reports.
        max_support_radius: Truncation limit used during validation.
    """

    dispersions: Triple
    potentials: Triple
    grid_n: int = MODEL_SETTINGS["default_grid_n"]
    name: str = "model"
    max_support_radius: int = field(default=MODEL_SETTINGS["max_support_radius"])

    def __post_init__(self) -> None:
        if len(self.dispersions) != 3 or len(self.potentials) != 3:
            raise PreconditionError("a model needs exactly three dispersions and three potentials")
        if isinstance(self.grid_n, bool) or not isinstance(self.grid_n, int) or self.grid_n < 2:
            raise InvalidResolutionError(f"grid_n must be an integer >= 2, got {self.grid_n!r}")
        for report in self.validation_reports():
            report.raise_for_failure()
        for index, c in enumerate(self.dispersions, start=1):
            try:
                effective_mass(c)
            except DegenerateDispersionError as e:
                logger.error(f"dispersion {index} is degenerate: {str(e)}")
                raise

    def validation_reports(self) -> List[ValidationReport]:
        reports = [
            validate_dispersion(c, f"dispersion {i}", self.max_support_radius)
            for i, c in enumerate(self.dispersions, start=1)
        ]
        reports += [
            validate_potential(c, f"potential {i}", self.max_support_radius)
            for i, c in enumerate(self.potentials, start=1)
        ]
        return reports

    @cached_property
    def derived(self) -> MassData:
        return mass_ratios(*(effective_mass(c) for c in self.dispersions))

    def dispersion(self, alpha: int) -> LatticeCoefficients:
        channel_partners(alpha)
        return self.dispersions[alpha - 1]

    def potential(self, alpha: int) -> LatticeCoefficients:
        channel_partners(alpha)
        return self.potentials[alpha - 1]

    def with_potentials(self, potentials: Triple) -> "ModelConfig":
        return replace(self, potentials=tuple(potentials))

    def to_dict(self) -> Dict[str, Any]:
        """Full resolved model, suitable for embedding in reports."""
        return {
            "name": self.name,
            "grid_n": self.grid_n,
            "max_support_radius": self.max_support_radius,
            "dispersions": [c.to_rows() for c in self.dispersions],
            "potentials": [c.to_rows() for c in self.potentials],
            "masses": self.derived.to_dict()
        }


def identical_particle_model(
    mu: float, grid_n: int = 8, hopping: float = 0.5, name: Optional[str] = None
) -> ModelConfig:
    """Three identical nearest-neighbour particles with zero-range coupling μ."""
    dispersion = nearest_neighbor_dispersion(hopping)
    potential = zero_range_potential(mu)
    return ModelConfig(
        dispersions=(dispersion, dispersion, dispersion),
        potentials=(potential, potential, potential),
        grid_n=grid_n,
        name=name or f"identical-nn-zr-{mu:g}"
    )
