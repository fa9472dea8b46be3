"""Configuration settings for Lattice Spectra.

This module contains all configuration settings including numerical
tolerances, solver limits, parallelism and logging configuration. Values may be
overridden through environment variables (a ``.env`` file is honoured).
"""
import os
import logging
from typing import Dict, Any, Final, Optional
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

LOG_LEVEL: Final[str] = os.getenv("LATTICE_SPECTRA_LOG_LEVEL", "INFO").upper()

# Configure logging
logging.basicConfig(
    level=getattr(logging, LOG_LEVEL, logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger: Final[logging.Logger] = logging.getLogger(__name__)

# Run ledger (disabled unless a path is given)
RUN_DB_PATH: Final[Optional[str]] = os.getenv("LATTICE_SPECTRA_RUN_DB")

# Shipped model fixture
FIXTURES_PATH: Final[str] = os.path.join(os.path.dirname(__file__), "fixtures")
DEFAULT_MODEL_PATH: Final[str] = os.path.join(FIXTURES_PATH, "identical-nn-zr.cfg")

# Numerical tolerances
NUMERICAL_SETTINGS: Final[Dict[str, Any]] = {
    "snap_tol": 1e-12,  # values this close to -pi are reported as +pi
    "jacobi_tol": 1e-12,
    "jacobi_max_sweeps": int(os.getenv("LATTICE_SPECTRA_JACOBI_MAX_SWEEPS", "60")),
    "jacobi_max_dim": int(os.getenv("LATTICE_SPECTRA_JACOBI_MAX_DIM", "32")),
    "gradient_tol": 1e-10,
    "fiber_tol": 1e-9,
    "rank_tol": 1e-12,
    "root_xtol": 1e-13
}

# Model settings
MODEL_SETTINGS: Final[Dict[str, Any]] = {
    "max_support_radius": int(os.getenv("LATTICE_SPECTRA_MAX_SUPPORT_RADIUS", "6")),
    "default_grid_n": 8,
    "radial_tol": 1e-14
}

# Channel settings
CHANNEL_SETTINGS: Final[Dict[str, Any]] = {
    "gap_tol_factor": 3.0,
    "fiber_solver": os.getenv("LATTICE_SPECTRA_FIBER_SOLVER", "auto"),
    "dense_fiber_max_dim": 216  # n <= 6 fibers are diagonalized densely
}

# Three-body settings
THREE_BODY_SETTINGS: Final[Dict[str, Any]] = {
    "full_h_max_n": int(os.getenv("LATTICE_SPECTRA_FULL_H_MAX_N", "4")),
    "faddeev_max_n": int(os.getenv("LATTICE_SPECTRA_FADDEEV_MAX_N", "6")),
    "candidate_threshold": 1e-6,
    "singular_cond": 1e12,
    "scan_points": 200
}

# Parallelism
PARALLEL_SETTINGS: Final[Dict[str, Any]] = {
    "threads": int(os.getenv("LATTICE_SPECTRA_THREADS", "1"))
}
