"""Norms, proximal operators and L2,1 reweighting diagonals.

Every function here is pure and returns a new array.
"""
import numpy as np
import scipy.linalg

from rfdl.errors import InvalidParameterError


def _check_threshold(tau: float) -> None:
    if not tau >= 0:
        raise InvalidParameterError(f"Threshold must be nonnegative, got {tau}.")


def row_norms(M: np.ndarray) -> np.ndarray:
    return np.linalg.norm(M, axis=1)


def l21_norm(M: np.ndarray) -> float:
    """Sum of the Euclidean norms of the rows of `M`."""
    return float(np.sum(row_norms(M)))


def l1_norm(M: np.ndarray) -> float:
    return float(np.sum(np.abs(M)))


def nuclear_norm(M: np.ndarray) -> float:
    """Sum of the singular values of `M`."""
    if M.size == 0:
        return 0.0
    return float(np.sum(scipy.linalg.svd(M, compute_uv=False)))


def soft_threshold(M: np.ndarray, tau: float) -> np.ndarray:
    """Elementwise shrinkage `sign(m) * max(|m| - tau, 0)`.

    Proximal map of `tau * ||.||_1`."""
    _check_threshold(tau)
    return np.sign(M) * np.maximum(np.abs(M) - tau, 0.0)


def _svd(M: np.ndarray):
    try:
        return scipy.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge where gesvd does not
        return scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesvd")


def svt(M: np.ndarray, tau: float) -> np.ndarray:
    """Singular value thresholding, the proximal map of `tau * ||.||_*`."""
    _check_threshold(tau)
    if tau == 0:
        return np.array(M, dtype=float)
    U, s, Vt = _svd(M)
    s = np.maximum(s - tau, 0.0)
    keep = s > 0
    return (U[:, keep] * s[keep]) @ Vt[keep, :]


def row_shrink(M: np.ndarray, tau: float) -> np.ndarray:
    """Scale each row `m` of `M` by `max(1 - tau / ||m||, 0)`.

    Proximal map of `tau * ||.||_{2,1}`; zero rows stay zero."""
    _check_threshold(tau)
    norms = row_norms(M)
    scale = np.zeros_like(norms)
    nonzero = norms > 0
    scale[nonzero] = np.maximum(1.0 - tau / norms[nonzero], 0.0)
    return M * scale[:, np.newaxis]


def reweight_diag(M: np.ndarray, floor: float) -> np.ndarray:
    """Diagonal of the L2,1 reweighting matrix, `1 / (2 max(||m_i||, floor))`.

    Returned as a vector; use ``w[:, None] * M`` for ``diag(w) @ M``."""
    if not floor > 0:
        raise InvalidParameterError(f"Row norm floor must be positive, got {floor}.")
    return 1.0 / (2.0 * np.maximum(row_norms(M), floor))
