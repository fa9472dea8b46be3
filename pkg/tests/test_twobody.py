"""Test module for the two-particle fiber operators h_α(k)."""
import itertools
from typing import List

import numpy as np
import pytest

from lattice_spectra.exceptions import OutOfDomainError, PreconditionError
from lattice_spectra.model import ModelConfig, channel_partners, identical_particle_model, zero_range_potential
from lattice_spectra.torus import make_grid, normalize
from lattice_spectra.twobody import (
    aligned_fiber_grid,
    band,
    birman_schwinger,
    build_h_matrix,
    count_eigenvalues,
    count_limit_sweep,
    discrete_spectrum,
    fredholm_determinant,
    fredholm_zeros,
    minimizer_track,
    potential_factor,
    potential_matrix,
    symbol_gap,
    two_body_symbol,
    two_body_symbol_gradient,
    two_body_symbol_hessian,
)

PI = np.pi

K_POINTS: List[np.ndarray] = [np.array(k) for k in ([0.0, 0.0, 0.0], [PI / 2, 0.0, -PI / 3], [PI, PI, PI])]

K_CUBE: List[np.ndarray] = [np.array(k) for k in itertools.product((0.0, PI / 2, PI), repeat=3)]


def test_band_at_zero(strong_model: ModelConfig) -> None:
    """Test that the band at k = 0 is [0, 12] for the nearest-neighbour pair."""
    b = band(strong_model, 1, np.zeros(3), make_grid(8))
    assert b.lo == pytest.approx(0.0, abs=1e-12)
    assert b.hi == pytest.approx(12.0, abs=1e-10)


def test_band_refinement_off_grid(strong_model: ModelConfig) -> None:
    """Test that refinement reaches the true extremum when the grid misses it."""
    coarse = band(strong_model, 1, np.zeros(3), make_grid(3))
    assert coarse.lo == pytest.approx(0.0, abs=1e-10)
    assert coarse.hi == pytest.approx(12.0, abs=1e-8)


def test_symbol_derivatives(unequal_model: ModelConfig) -> None:
    """Test the analytic gradient and Hessian of E_k(q) against differences."""
    k = np.array([0.7, -0.2, 1.9])
    q = np.array([0.3, 1.2, -0.8])
    h = 1e-5
    for alpha in (1, 2, 3):
        grad = two_body_symbol_gradient(unequal_model, alpha, k, q)
        numeric = np.array([
            (two_body_symbol(unequal_model, alpha, k, q + h * e) - two_body_symbol(unequal_model, alpha, k, q - h * e))
            / (2 * h)
            for e in np.eye(3)
        ])
        assert np.allclose(grad, numeric, atol=1e-7)
        hess = two_body_symbol_hessian(unequal_model, alpha, k, q)
        assert np.allclose(hess, hess.T, atol=1e-12)


def test_potential_matrix_normalization(strong_model: ModelConfig) -> None:
    """Test that the zero-range kernel is μ/n³ and has rank one."""
    matrix = potential_matrix(strong_model.potential(1), 4)
    assert np.allclose(matrix, 8.0 / 64)
    assert not matrix.flags.writeable
    basis, values = potential_factor(strong_model.potential(1), 4)
    assert values == pytest.approx([8.0])
    assert basis.shape == (64, 1)


def test_discrete_spectrum_bound_state(strong_model: ModelConfig) -> None:
    """Test that coupling 8 gives exactly one bound pair below the band at k = 0."""
    spectrum = discrete_spectrum(strong_model, 1, np.zeros(3), make_grid(8))
    assert len(spectrum.below) == 1
    assert -8.0 < spectrum.below[0] < 0.0
    assert spectrum.above == ()


def test_discrete_spectrum_free(free_model: ModelConfig) -> None:
    """Test that the free pair has no eigenvalues outside its band."""
    spectrum = discrete_spectrum(free_model, 1, np.zeros(3), make_grid(4))
    assert spectrum.below == () and spectrum.above == ()


@pytest.mark.parametrize("alpha", [1, 2, 3])
def test_low_rank_solver_matches_dense(unequal_model: ModelConfig, alpha: int) -> None:
    """Test that bisection on the compressed count finds the dense eigenvalues."""
    grid = make_grid(5)
    for k in K_POINTS:
        dense = discrete_spectrum(unequal_model, alpha, k, grid, solver="dense")
        low_rank = discrete_spectrum(unequal_model, alpha, k, grid, solver="low_rank")
        assert len(dense.below) == len(low_rank.below)
        assert np.allclose(dense.below, low_rank.below, atol=1e-8)


def test_unknown_solver_rejected(strong_model: ModelConfig) -> None:
    """Test that an unknown solver name is a precondition error."""
    with pytest.raises(PreconditionError):
        discrete_spectrum(strong_model, 1, np.zeros(3), make_grid(4), solver="magic")


@pytest.mark.parametrize("n", [4, 6, pytest.param(8, marks=pytest.mark.slow)])
def test_birman_schwinger_count(strong_model: ModelConfig, n: int) -> None:
    """Test N(k, z) against the number of eigenvalues of h(k) below z on 27 k-points × 20 z-values."""
    grid = make_grid(n)
    for k in K_CUBE:
        b = band(strong_model, 1, k, grid)
        eigenvalues = build_h_matrix(strong_model, 1, k, grid).eigenvalues()
        for z in np.linspace(b.lo - 9.0, b.lo - 1e-3, 20):
            expected = int(np.sum(eigenvalues < z))
            assert count_eigenvalues(strong_model, 1, k, z, grid, known_band=b) == expected


def test_birman_schwinger_positive_and_decaying(strong_model: ModelConfig) -> None:
    """Test that G(k, z) is positive semidefinite and its norm shrinks as z decreases."""
    grid = make_grid(4)
    for k in K_POINTS:
        b = band(strong_model, 1, k, grid)
        norms = []
        for offset in (0.1, 1.0, 5.0, 20.0):
            g = birman_schwinger(strong_model, 1, k, b.lo - offset, grid, known_band=b)
            assert g.eigenvalues().min() > -1e-12
            norms.append(float(np.linalg.norm(g.entries)))
        assert all(x > y for x, y in zip(norms, norms[1:]))


def test_birman_schwinger_domain(strong_model: ModelConfig) -> None:
    """Test that G(k, z) needs z below the band and stays symmetric."""
    grid = make_grid(4)
    g = birman_schwinger(strong_model, 1, np.zeros(3), -1.0, grid)
    assert g.symmetry_defect() < 1e-14
    with pytest.raises(OutOfDomainError):
        count_eigenvalues(strong_model, 1, np.zeros(3), 0.5, grid)
    with pytest.raises(OutOfDomainError):
        birman_schwinger(strong_model, 1, np.zeros(3), 0.5, grid)


def test_count_limit_sweep_monotone(strong_model: ModelConfig) -> None:
    """Test that counts grow monotonically as z approaches the band edge."""
    sweep = count_limit_sweep(strong_model, 1, np.zeros(3), make_grid(6), steps=8)
    zs = [z for z, _ in sweep]
    counts = [c for _, c in sweep]
    assert zs == sorted(zs)
    assert counts == sorted(counts)
    assert counts[-1] == 1


def test_count_bounded_over_resolutions(strong_model: ModelConfig) -> None:
    """Test that the below-band count near k = 0 does not grow with n."""
    counts = []
    for n in (4, 6, 8, 10):
        spectrum = discrete_spectrum(strong_model, 1, np.array([0.05, 0.0, 0.0]), make_grid(n), solver="low_rank")
        counts.append(len(spectrum.below))
    assert max(counts) <= 1
    assert counts[1:] == [counts[1]] * 3


def test_fredholm_zeros_match_eigenvalues(strong_model: ModelConfig) -> None:
    """Test that determinant zeros reproduce the below-band eigenvalues on n = 6."""
    grid = make_grid(6)
    for k in K_POINTS:
        spectrum = discrete_spectrum(strong_model, 1, k, grid, continuum_tol=0.0)
        zeros = fredholm_zeros(strong_model, 1, k, grid)
        assert len(zeros) == len(spectrum.below)
        assert np.allclose(zeros, spectrum.below, atol=1e-8)


def test_fredholm_determinant_free_and_domain(free_model: ModelConfig, strong_model: ModelConfig) -> None:
    """Test Δ ≡ 1 without interaction and the band exclusion."""
    grid = make_grid(4)
    assert fredholm_determinant(free_model, 1, np.zeros(3), -2.0, grid) == pytest.approx(1.0)
    assert fredholm_determinant(free_model, 1, np.zeros(3), 20.0, grid) == pytest.approx(1.0)
    with pytest.raises(OutOfDomainError):
        fredholm_determinant(strong_model, 1, np.zeros(3), 3.0, grid)


def test_fredholm_zeros_window_check(strong_model: ModelConfig) -> None:
    """Test that a scan window reaching into the band is rejected."""
    with pytest.raises(PreconditionError):
        fredholm_zeros(strong_model, 1, np.zeros(3), make_grid(4), z_lo=-1.0, z_hi=1.0)


def test_minimizer_track_continuous(strong_model: ModelConfig) -> None:
    """Test that the symbol minimizer stays at q = 0 for small k."""
    path = [np.array([t, 0.0, 0.0]) for t in np.linspace(0.0, 0.5, 6)]
    track = minimizer_track(strong_model, 1, path, make_grid(8))
    assert len(track) == 6
    assert all(np.max(np.abs(q)) < 1e-6 for q in track)


@pytest.mark.parametrize("alpha", [1, 2, 3])
def test_aligned_grid_places_particles_on_base_grid(unequal_model: ModelConfig, alpha: int) -> None:
    """Test that both pair momenta of every fiber state are base grid points."""
    base = make_grid(4)
    beta, gamma = channel_partners(alpha)
    md = unequal_model.derived
    k = base.points[base.add_index(5, 17)]
    fiber = aligned_fiber_grid(base, unequal_model, alpha, k)
    k_beta = normalize(md.l_pair(gamma, beta) * k + fiber.points)
    k_gamma = normalize(md.l_pair(beta, gamma) * k - fiber.points)
    assert all(base.contains(p) for p in k_beta)
    assert all(base.contains(p) for p in k_gamma)


def test_symbol_gap() -> None:
    """Test the largest adjacent gap of sorted values."""
    assert symbol_gap([3.0, 0.0, 1.0]) == pytest.approx(2.0)
    assert symbol_gap([1.0]) == 0.0


def test_potential_override(strong_model: ModelConfig) -> None:
    """Test that a potential override replaces the model's table."""
    spectrum = discrete_spectrum(strong_model, 1, np.zeros(3), make_grid(4), potential=zero_range_potential(0.0))
    assert spectrum.below == ()


def test_continuum_tolerance_defaults_to_symbol_gap() -> None:
    """Test that a shallow grid eigenvalue within the symbol gap is not counted as bound."""
    model = identical_particle_model(4.3)
    grid = make_grid(8)
    symbol = two_body_symbol(model, 1, np.zeros(3), grid.points)

    spectrum = discrete_spectrum(model, 1, np.zeros(3), grid)
    assert spectrum.continuum_tol == pytest.approx(symbol_gap(symbol))
    assert spectrum.continuum_tol == pytest.approx(2.0 * (1.0 - np.cos(PI / 4)))
    assert spectrum.below == ()
    assert spectrum.to_dict()["continuum_tol"] == spectrum.continuum_tol

    resolved = discrete_spectrum(model, 1, np.zeros(3), grid, continuum_tol=0.0)
    assert len(resolved.below) == 1
    assert -spectrum.continuum_tol < resolved.below[0] < 0.0
