"""Closed-form updates of the dictionary D, the projection P, the classifier C
and the classification error E.

Shapes: X is n x N, P is K x n, D is r x K, V is N x r, C is K x c, H is c x N
and E, Y4 are N x c. Reweighting diagonals are vectors.
"""
import logging
import typing as t

import numpy as np
import scipy.linalg

from rfdl.errors import DegenerateDictionaryError
from rfdl.errors import DimensionMismatchError
from rfdl.errors import SingularSystemError
from rfdl.prox import row_shrink

if t.TYPE_CHECKING:
    from rfdl.solver import SolverState

logger = logging.getLogger(__name__)

COLUMN_SUM_MIN = 1e-10


def solve_spd(
    M: np.ndarray, B: np.ndarray, what: str, hint: str = "", *, strict: bool = False
) -> np.ndarray:
    """Solve `M Z = B` for symmetric positive semidefinite `M`.

    Cholesky is tried first. When it fails the minimum norm least-squares
    solution is returned, unless `strict` is set (an unridged system), in
    which case the failure is a :class:`SingularSystemError`."""
    try:
        return scipy.linalg.solve(M, B, assume_a="pos")
    except np.linalg.LinAlgError:
        if strict:
            raise SingularSystemError(what, hint)
    logger.debug(f"Cholesky failed for {what}, solving by least squares.")
    try:
        return scipy.linalg.lstsq(M, B)[0]
    except np.linalg.LinAlgError:
        raise SingularSystemError(what, hint)


def solve_spd_right(
    B: np.ndarray, M: np.ndarray, what: str, hint: str = "", *, strict: bool = False
) -> np.ndarray:
    """Compute `B M^-1` for symmetric positive semidefinite `M`."""
    return solve_spd(M, B.T, what, hint, strict=strict).T


def _ridged(M: np.ndarray, ridge: float) -> np.ndarray:
    if ridge:
        M = M + ridge * np.eye(M.shape[0])
    return M


def solve_dictionary(V: np.ndarray, X: np.ndarray, P: np.ndarray, tau: float) -> np.ndarray:
    """Least-squares dictionary `D = V^T (PX)^T (PX (PX)^T + tau I)^-1`.

    The reweighting diagonal Q multiplies both sides of the normal equations
    and cancels, so this is also the Frobenius fit of `V^T ~ D P X`."""
    if P.shape[1] != X.shape[0]:
        raise DimensionMismatchError("projection columns", X.shape[0], P.shape[1])
    if V.shape[0] != X.shape[1]:
        raise DimensionMismatchError("V rows", X.shape[1], V.shape[0])
    PX = P @ X
    return solve_spd_right(
        V.T @ PX.T,
        _ridged(PX @ PX.T, tau),
        "the dictionary",
        " Increase tau or reduce the dictionary size.",
        strict=not tau,
    )


def normalize_columns(D: np.ndarray) -> np.ndarray:
    """Rescale every column of `D` to sum to one."""
    totals = D.sum(axis=0)
    small = np.flatnonzero(np.abs(totals) < COLUMN_SUM_MIN)
    if small.size:
        raise DegenerateDictionaryError(int(small[0]), float(totals[small[0]]))
    return D / totals


def update_d(
    V: np.ndarray, X: np.ndarray, P: np.ndarray, Q: np.ndarray, tau: float
) -> np.ndarray:
    if Q.shape != (V.shape[1],):
        raise DimensionMismatchError("Q weights", V.shape[1], Q.size)
    return normalize_columns(solve_dictionary(V, X, P, tau))


def _projection(
    left: np.ndarray, rhs: np.ndarray, X: np.ndarray, tau: float
) -> np.ndarray:
    # P = left^-1 rhs (X X^T + tau I)^-1
    P = solve_spd(left, rhs, "the projection")
    return solve_spd_right(
        P,
        _ridged(X @ X.T, tau),
        "the projection",
        " Increase tau or reduce the feature dimension.",
        strict=not tau,
    )


def _projection_terms(state: "SolverState", X: np.ndarray) -> t.Tuple[np.ndarray, np.ndarray]:
    params = state.params
    alpha, mu = params.alpha, state.mu
    D, Q = state.D, state.Q
    K = D.shape[1]
    left = 2 * alpha * (D.T @ (Q[:, np.newaxis] * D)) + 2 * mu * np.eye(K)
    rhs = 2 * alpha * (D.T @ (Q[:, np.newaxis] * (state.V.T @ X.T))) + (
        mu * state.J + mu * state.S - state.Y2 - state.Y3
    ) @ X.T
    return left, rhs


def update_p_jrfdl(state: "SolverState", X: np.ndarray) -> np.ndarray:
    left, rhs = _projection_terms(state, X)
    return _projection(left, rhs, X, state.params.tau)


def update_p_djrfdl(state: "SolverState", X: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Projection update with the joint classification terms.

    Reduces to :func:`update_p_jrfdl` when C, E and Y4 are zero."""
    if H.shape != (state.C.shape[1], X.shape[1]):
        raise DimensionMismatchError("label matrix columns", X.shape[1], H.shape[1])
    left, rhs = _projection_terms(state, X)
    mu, C = state.mu, state.C
    left = left + mu * (C @ C.T)
    rhs = rhs + C @ ((state.Y4.T + mu * H - mu * state.E.T) @ X.T)
    return _projection(left, rhs, X, state.params.tau)


def update_c(
    PX: np.ndarray,
    H: np.ndarray,
    E: np.ndarray,
    Y4: np.ndarray,
    mu: float,
    beta: float,
    ridge: float = 0.0,
) -> np.ndarray:
    """Classifier `C = (Z Z^T + 2 beta I / mu)^-1 (Z Y4 / mu + Z H^T - Z E)`
    with `Z = PX`.

    `ridge` is added to the diagonal on top of `2 beta / mu`."""
    if H.shape[1] != PX.shape[1]:
        raise DimensionMismatchError("label matrix columns", PX.shape[1], H.shape[1])
    diagonal = 2 * beta / mu + ridge
    lhs = _ridged(PX @ PX.T, diagonal)
    rhs = PX @ (Y4 / mu + H.T - E)
    return solve_spd(
        lhs,
        rhs,
        "the classifier",
        " The coefficients are rank deficient; use beta > 0 for a ridge solution.",
        strict=not diagonal,
    )


def classification_residual(
    H: np.ndarray, PX: np.ndarray, C: np.ndarray, E: np.ndarray
) -> np.ndarray:
    """`H^T - X^T P^T C - E`, one row per sample."""
    return H.T - PX.T @ C - E


def update_e(
    H: np.ndarray,
    X: np.ndarray,
    P: np.ndarray,
    C: np.ndarray,
    Y4: np.ndarray,
    mu: float,
    beta: float,
) -> np.ndarray:
    PX = P @ X
    return row_shrink(H.T - PX.T @ C + Y4 / mu, beta / mu)
