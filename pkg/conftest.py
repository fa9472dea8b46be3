"""Pytest configuration and fixtures for the Lattice Spectra tests.

This module provides test fixtures and configuration for the test suite,
including temporary directory management for reports and run ledgers.
"""
import os
import shutil
import sys
import tempfile
from typing import Dict, Generator

import pytest

# Add the project root directory to the Python path
project_root = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, project_root)

from lattice_spectra.config import DEFAULT_MODEL_PATH  # noqa: E402


@pytest.fixture
def test_dirs() -> Generator[Dict[str, str], None, None]:
    """Create temporary directories for testing.

    Creates a temporary directory with a copy of the shipped model file and
    paths for reports, CSV tables and the run ledger.

    Yields:
        Dict[str, str]: Dictionary containing paths to test directories and files.
            Keys:
                - temp_dir: Root temporary directory
                - model: Copy of the shipped model file
                - report: Path for a JSON report
                - csv: Path for a CSV table
                - db: Path for a run ledger

    Note:
        The temporary directory and its contents are automatically cleaned up
        after the test completes.
    """
    temp_dir = tempfile.mkdtemp()
    model_path = os.path.join(temp_dir, "identical-nn-zr.cfg")
    shutil.copyfile(DEFAULT_MODEL_PATH, model_path)

    yield {
        "temp_dir": temp_dir,
        "model": model_path,
        "report": os.path.join(temp_dir, "report.json"),
        "csv": os.path.join(temp_dir, "table.csv"),
        "db": os.path.join(temp_dir, "runs.db")
    }

    shutil.rmtree(temp_dir)
