"""Dense linear algebra used by the spectral engines.

Small symmetric matrices are diagonalized by an in-repo cyclic Jacobi solver
whose sweep order is fixed, so results are reproducible bit for bit; larger
ones go to LAPACK through :mod:`scipy.linalg`.
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt
import scipy.linalg

from lattice_spectra.config import NUMERICAL_SETTINGS
from lattice_spectra.exceptions import NumericalFailureError

logger = logging.getLogger(__name__)

Matrix = npt.NDArray[np.float64]

EIGEN_METHODS = ("auto", "jacobi", "lapack")


def symmetry_defect(a: Matrix) -> float:
    """max |A − Aᵀ| relative to max(1, max |A|)."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - a.T)) / max(1.0, float(np.max(np.abs(a)))))


def _off_diagonal_norm(a: Matrix) -> float:
    return math.sqrt(max(float(np.sum(a * a) - np.sum(np.diag(a) ** 2)), 0.0))


def jacobi_eigh(
    a: Matrix,
    tol: Optional[float] = None,
    max_sweeps: Optional[int] = None
) -> Tuple[npt.NDArray[np.float64], Matrix]:
    """Eigen-decompose a real symmetric matrix by cyclic Jacobi rotations.

    Pairs (p, q) with p < q are visited row by row in every sweep. Iteration
    stops once the off-diagonal Frobenius norm drops below ``tol·‖A‖_F``.

    Args:
        a: Symmetric matrix.
        tol: Relative convergence threshold.
        max_sweeps: Sweep limit before giving up.

    Returns:
        Tuple[ndarray, ndarray]: Ascending eigenvalues and the matching
        orthonormal eigenvectors as columns.

    Raises:
        NumericalFailureError: If the sweep limit is reached.
    """
    tol = NUMERICAL_SETTINGS["jacobi_tol"] if tol is None else tol
    max_sweeps = NUMERICAL_SETTINGS["jacobi_max_sweeps"] if max_sweeps is None else max_sweeps
    work = np.array(a, dtype=float, copy=True)
    dim = work.shape[0]
    vectors = np.eye(dim)
    scale = float(np.linalg.norm(work))
    if dim <= 1 or scale == 0.0:
        return np.diag(work).copy(), vectors

    threshold = tol * scale
    off = _off_diagonal_norm(work)
    sweeps = 0
    while off > threshold:
        if sweeps >= max_sweeps:
            raise NumericalFailureError(
                "Jacobi eigensolver did not converge",
                {"sweeps": sweeps, "off_norm": off, "threshold": threshold, "dim": dim}
            )
        for p in range(dim - 1):
            for q in range(p + 1, dim):
                apq = work[p, q]
                if abs(apq) <= 1e-300 or abs(apq) < 1e-3 * threshold / dim:
                    continue
                theta = (work[q, q] - work[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 1.0 / (2.0 * theta)
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p = work[:, p].copy()
                col_q = work[:, q].copy()
                work[:, p] = c * col_p - s * col_q
                work[:, q] = s * col_p + c * col_q
                row_p = work[p, :].copy()
                row_q = work[q, :].copy()
                work[p, :] = c * row_p - s * row_q
                work[q, :] = s * row_p + c * row_q
                work[p, q] = work[q, p] = 0.0

                vec_p = vectors[:, p].copy()
                vec_q = vectors[:, q].copy()
                vectors[:, p] = c * vec_p - s * vec_q
                vectors[:, q] = s * vec_p + c * vec_q
        sweeps += 1
        off = _off_diagonal_norm(work)
        logger.debug(f"Jacobi sweep {sweeps}: off-diagonal norm {off:.3e}")

    eigenvalues = np.diag(work).copy()
    order = np.argsort(eigenvalues, kind="stable")
    return eigenvalues[order], vectors[:, order]


def _resolve_method(method: str, dim: int) -> str:
    if method not in EIGEN_METHODS:
        raise ValueError(f"unknown eigen method {method!r}; expected one of {EIGEN_METHODS}")
    if method == "auto":
        return "jacobi" if dim <= NUMERICAL_SETTINGS["jacobi_max_dim"] else "lapack"
    return method


def symmetric_eigh(a: Matrix, method: str = "auto") -> Tuple[npt.NDArray[np.float64], Matrix]:
    """Eigenvalues (ascending) and eigenvectors of a symmetric matrix.

    Raises:
        NumericalFailureError: If the selected solver fails.
    """
    a = np.asarray(a, dtype=float)
    if _resolve_method(method, a.shape[0]) == "jacobi":
        return jacobi_eigh(a)
    try:
        return scipy.linalg.eigh(a, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.error(f"LAPACK eigensolver failed on a {a.shape[0]}x{a.shape[0]} matrix: {str(e)}")
        raise NumericalFailureError("LAPACK eigensolver failed", {"dim": a.shape[0], "reason": str(e)}) from e


def symmetric_eigvalsh(a: Matrix, method: str = "auto") -> npt.NDArray[np.float64]:
    """Ascending eigenvalues of a symmetric matrix (see :func:`symmetric_eigh`)."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] == 0:
        return np.zeros(0)
    if _resolve_method(method, a.shape[0]) == "jacobi":
        return jacobi_eigh(a)[0]
    try:
        return scipy.linalg.eigh(a, eigvals_only=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.error(f"LAPACK eigensolver failed on a {a.shape[0]}x{a.shape[0]} matrix: {str(e)}")
        raise NumericalFailureError("LAPACK eigensolver failed", {"dim": a.shape[0], "reason": str(e)}) from e


def signed_log_determinant(a: Matrix) -> Tuple[float, float]:
    """Sign and log-magnitude of det(A) from a pivoted LU factorization.

    Returns:
        Tuple[float, float]: ``(sign, log|det|)``; sign is 0 for a singular matrix.
    """
    a = np.asarray(a, dtype=float)
    if a.shape[0] == 0:
        return 1.0, 0.0
    try:
        lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.error(f"LU factorization failed: {str(e)}")
        raise NumericalFailureError("LU factorization failed", {"dim": a.shape[0], "reason": str(e)}) from e
    diag = np.diag(lu)
    if np.any(diag == 0.0):
        return 0.0, -math.inf
    swaps = int(np.count_nonzero(piv != np.arange(piv.size)))
    sign = (-1.0) ** swaps * float(np.prod(np.sign(diag)))
    return sign, float(np.sum(np.log(np.abs(diag))))


def determinant(a: Matrix) -> float:
    sign, logdet = signed_log_determinant(a)
    return 0.0 if sign == 0.0 else sign * math.exp(logdet)


def smallest_singular_value(a: Matrix) -> float:
    """Smallest singular value; 1.0 for an empty operator (identity on {0})."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 1.0
    try:
        return float(np.min(scipy.linalg.svdvals(a, check_finite=True)))
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.error(f"SVD failed: {str(e)}")
        raise NumericalFailureError("SVD failed", {"dim": a.shape[0], "reason": str(e)}) from e
