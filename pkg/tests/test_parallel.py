"""Test module for the ordered parallel map."""
import numpy as np
from pytest_mock import MockerFixture

from lattice_spectra import parallel
from lattice_spectra.channel import sigma_two
from lattice_spectra.model import ModelConfig
from lattice_spectra.parallel import parallel_map
from lattice_spectra.torus import make_grid


def test_single_thread_runs_inline(mocker: MockerFixture) -> None:
    """Test that one worker never touches joblib."""
    spy = mocker.patch.object(parallel, "Parallel")
    assert parallel_map(lambda x: x * x, range(5), threads=1) == [0, 1, 4, 9, 16]
    spy.assert_not_called()


def test_threads_preserve_order() -> None:
    """Test that a thread pool returns results in input order."""
    assert parallel_map(lambda x: -x, range(50), threads=4) == [-x for x in range(50)]


def test_default_thread_count_from_settings(mocker: MockerFixture) -> None:
    """Test that the configured thread count applies when none is given."""
    mocker.patch.dict(parallel.PARALLEL_SETTINGS, {"threads": 3})
    pool = mocker.patch.object(parallel, "Parallel")
    pool.return_value.side_effect = lambda jobs: [f(*args, **kwargs) for f, args, kwargs in jobs]
    assert parallel_map(str, [1, 2], threads=None) == ["1", "2"]
    pool.assert_called_once_with(n_jobs=3, prefer="threads")


def test_threaded_sweep_matches_serial(strong_model: ModelConfig) -> None:
    """Test that a threaded σ_two sweep gives the serial samples."""
    grid = make_grid(3)
    serial = sigma_two(strong_model, 1, np.zeros(3), grid, threads=1)
    threaded = sigma_two(strong_model, 1, np.zeros(3), grid, threads=3)
    assert [s.value for s in serial] == [s.value for s in threaded]
