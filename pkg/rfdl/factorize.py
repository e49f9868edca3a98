"""Concept factorization X ~ X W V^T and the robust multiplicative W/V updates.

W and V are N x r nonnegative matrices, with N the number of samples. The
reweighting diagonals G (length N) and Q (length r) are stored as vectors.
"""
import logging
import typing as t

import numpy as np

from rfdl.errors import DimensionMismatchError
from rfdl.errors import check_finite
from rfdl.prox import reweight_diag

if t.TYPE_CHECKING:
    from rfdl.solver import SolverState

logger = logging.getLogger(__name__)

CLAMP = 1e-12


def gram(X: np.ndarray) -> np.ndarray:
    """The sample Gram matrix `A = X^T X`, symmetrized."""
    A = X.T @ X
    return (A + A.T) / 2


def split_signs(M: np.ndarray) -> t.Tuple[np.ndarray, np.ndarray]:
    """Nonnegative parts `(M+, M-)` with `M = M+ - M-`."""
    return np.maximum(M, 0.0), np.maximum(-M, 0.0)


def _ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    return np.maximum(numerator, CLAMP) / np.maximum(denominator, CLAMP)


def _check_pair(A: np.ndarray, W: np.ndarray, V: np.ndarray) -> None:
    N = A.shape[0]
    if A.shape != (N, N):
        raise DimensionMismatchError("Gram matrix columns", N, A.shape[1])
    if W.shape[0] != N:
        raise DimensionMismatchError("W rows", N, W.shape[0])
    if V.shape[0] != N:
        raise DimensionMismatchError("V rows", N, V.shape[0])
    if W.shape[1] != V.shape[1]:
        raise DimensionMismatchError("factor rank of V", W.shape[1], V.shape[1])


def cf_step(
    A: np.ndarray, W: np.ndarray, V: np.ndarray
) -> t.Tuple[np.ndarray, np.ndarray]:
    """One round of the concept factorization multiplicative rules.

    W is updated first and the new W is used for V. A Gram matrix with
    negative entries (centred data) is split as `A+ - A-`, with the `A-`
    terms moved to the opposite side of each ratio; for `A >= 0` these are
    the plain rules."""
    _check_pair(A, W, V)
    Ap, An = split_signs(A)
    VtV = V.T @ V
    W = W * _ratio(Ap @ V + An @ W @ VtV, An @ V + Ap @ W @ VtV)
    ApW, AnW = Ap @ W, An @ W
    V = V * _ratio(ApW + V @ (W.T @ AnW), AnW + V @ (W.T @ ApW))
    return W, V


def cf_objective(X: np.ndarray, W: np.ndarray, V: np.ndarray) -> float:
    """Squared Frobenius error `||X - X W V^T||^2`."""
    return float(np.linalg.norm(X - X @ W @ V.T) ** 2)


def factor_residual(X: np.ndarray, W: np.ndarray, V: np.ndarray) -> np.ndarray:
    """The N x n residual `X^T - V W^T X^T`, one row per sample."""
    XT = X.T
    return XT - V @ (W.T @ XT)


def robust_wv_update(
    A: np.ndarray,
    X: np.ndarray,
    W: np.ndarray,
    V: np.ndarray,
    *,
    G: np.ndarray,
    Q: np.ndarray,
    F: np.ndarray,
    Y1: np.ndarray,
    D: np.ndarray,
    P: np.ndarray,
    alpha: float,
    mu: float,
) -> t.Tuple[np.ndarray, np.ndarray]:
    """Reweighted multiplicative updates of W then V.

    `G` weights the factorization residual rows; `Q` weights the rows of
    `V^T - D P X`. Every mixed-sign term of the V gradient (`A`, `X^T P^T D^T`,
    `F` and the multiplier `Y1`) contributes its negative part to the other
    side of the ratio, so both factors stay nonnegative. With nonnegative
    terms the rules are the closed forms of the reweighted problem."""
    _check_pair(A, W, V)
    N, r = V.shape
    if G.shape != (N,):
        raise DimensionMismatchError("G weights", N, G.size)
    if Q.shape != (r,):
        raise DimensionMismatchError("Q weights", r, Q.size)
    Ap, An = split_signs(A)

    GV = G[:, np.newaxis] * V
    VtGV = V.T @ GV
    W = W * _ratio(Ap @ GV + An @ W @ VtGV, An @ GV + Ap @ W @ VtGV)

    ApW, AnW = Ap @ W, An @ W
    g = 2 * G[:, np.newaxis]
    coded_p, coded_n = split_signs((X.T @ (P.T @ D.T)) * Q)  # X^T P^T D^T Q
    F_p, F_n = split_signs(F)
    Y1_p, Y1_n = split_signs(Y1)
    numerator = g * (ApW + V @ (W.T @ AnW)) + 2 * alpha * coded_p + mu * F_p + Y1_n
    denominator = (
        g * (AnW + V @ (W.T @ ApW))
        + 2 * alpha * (V * Q + coded_n)
        + Y1_p
        + mu * (V + F_n)
    )
    V = V * _ratio(numerator, denominator)
    return W, V


def robust_wv_step(A: np.ndarray, state: "SolverState", X: np.ndarray) -> None:
    """Update `state.W` and `state.V` in place."""
    W, V = robust_wv_update(
        A,
        X,
        state.W,
        state.V,
        G=state.G,
        Q=state.Q,
        F=state.F,
        Y1=state.Y1,
        D=state.D,
        P=state.P,
        alpha=state.params.alpha,
        mu=state.mu,
    )
    limit = state.params.divergence_limit
    check_finite("W", W, state.iter, limit)
    check_finite("V", V, state.iter, limit)
    state.W, state.V = W, V


def wv_lagrangian(
    X: np.ndarray,
    W: np.ndarray,
    V: np.ndarray,
    *,
    G: np.ndarray,
    Q: np.ndarray,
    F: np.ndarray,
    Y1: np.ndarray,
    D: np.ndarray,
    P: np.ndarray,
    alpha: float,
    mu: float,
) -> float:
    """The part of the augmented Lagrangian that depends on W and V, with the
    reweighting diagonals held fixed."""
    psi = factor_residual(X, W, V)
    chi = V.T - D @ (P @ X)
    return float(
        np.sum(G * np.sum(psi**2, axis=1))
        + alpha * np.sum(Q * np.sum(chi**2, axis=1))
        + np.sum(Y1 * (V - F))
        + mu / 2 * np.linalg.norm(V - F) ** 2
    )


def update_g(X: np.ndarray, W: np.ndarray, V: np.ndarray, floor: float) -> np.ndarray:
    """Reweighting diagonal of the factorization residual, one weight per sample."""
    return reweight_diag(factor_residual(X, W, V), floor)
