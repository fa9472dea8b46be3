"""Test configuration and fixtures for the Lattice Spectra tests.

This module provides pytest fixtures for the model families the suite runs
on: three identical nearest-neighbour particles with zero-range coupling of
varying strength, the free system, and an unequal-mass system.
"""
import os
from typing import Callable

import pytest

from lattice_spectra.model import (
    ModelConfig,
    identical_particle_model,
    nearest_neighbor_dispersion,
    zero_range_potential,
)
from lattice_spectra.run_store import RunStore


@pytest.fixture(scope="session")
def strong_model() -> ModelConfig:
    """Zero-range coupling 8: every pair binds at k = 0.

    Returns:
        ModelConfig: The shipped fixture model.
    """
    return identical_particle_model(8.0)


@pytest.fixture(scope="session")
def deep_model() -> ModelConfig:
    """Zero-range coupling 20: the pair branch is split off from the band.

    Returns:
        ModelConfig: Model with a deep two-particle bound state.
    """
    return identical_particle_model(20.0)


@pytest.fixture(scope="session")
def weak_model() -> ModelConfig:
    """Zero-range coupling 1, below the continuum binding threshold.

    Returns:
        ModelConfig: Weakly coupled model.
    """
    return identical_particle_model(1.0)


@pytest.fixture(scope="session")
def free_model() -> ModelConfig:
    """No interaction at all.

    Returns:
        ModelConfig: Model with three empty potential tables.
    """
    return identical_particle_model(0.0)


@pytest.fixture(scope="session")
def unequal_model() -> ModelConfig:
    """Masses (1, 2, 1/2) from hoppings 1/2, 1/4 and 1, coupling 6 in every pair.

    Returns:
        ModelConfig: Model with three different mass ratios.
    """
    potential = zero_range_potential(6.0)
    return ModelConfig(
        dispersions=(
            nearest_neighbor_dispersion(0.5),
            nearest_neighbor_dispersion(0.25),
            nearest_neighbor_dispersion(1.0)
        ),
        potentials=(potential, potential, potential),
        grid_n=4,
        name="unequal-nn-zr"
    )


@pytest.fixture
def write_model(tmp_path: os.PathLike) -> Callable[[str], str]:
    """Write model-file text to a temporary file.

    Returns:
        Callable[[str], str]: Function taking the text and returning the path.
    """
    def _write(text: str, name: str = "model.cfg") -> str:
        path = os.path.join(str(tmp_path), name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    return _write


@pytest.fixture
def run_store(tmp_path: os.PathLike) -> RunStore:
    """Create a run ledger in a temporary directory.

    Returns:
        RunStore: A fresh ledger.
    """
    return RunStore(os.path.join(str(tmp_path), "runs.db"))
