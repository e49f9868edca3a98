import logging
import typing as t

import numpy as np

from rfdl.config import HyperParams
from rfdl.dictsolve import classification_residual
from rfdl.dictsolve import update_c
from rfdl.errors import DimensionMismatchError
from rfdl.errors import InsufficientSamplesError
from rfdl.errors import InvalidParameterError
from rfdl.errors import LabelDomainError
from rfdl.errors import MissingClassifierError
from rfdl.errors import check_finite
from rfdl.model import Model
from rfdl.prox import row_shrink

logger = logging.getLogger(__name__)

POSTHOC_TOL = 1e-7
POSTHOC_MAX_ITER = 300


def build_label_matrix(labels: t.Sequence[int], c: int) -> np.ndarray:
    """One-hot c x N label matrix: column j has a 1 in row `labels[j]`."""
    labels = np.asarray(labels, dtype=np.int64)
    if c < 1:
        raise LabelDomainError("Class count must be at least 1.")
    bad = np.flatnonzero((labels < 0) | (labels >= c))
    if bad.size:
        raise LabelDomainError(
            f"Label {int(labels[bad[0]])} of sample {int(bad[0])} is outside [0, {c})."
        )
    H = np.zeros((c, labels.size))
    H[labels, np.arange(labels.size)] = 1.0
    return H


class ClassifierFit(t.NamedTuple):
    C: np.ndarray
    E: np.ndarray
    iterations: int
    residual: float


def fit_posthoc_classifier(
    P: np.ndarray,
    X: np.ndarray,
    H: np.ndarray,
    beta: float,
    params: HyperParams = HyperParams(),
    tol: float = POSTHOC_TOL,
    max_iter: int = POSTHOC_MAX_ITER,
) -> ClassifierFit:
    """Fit a linear classifier on the fixed coefficients PX.

    Solves ``min ||E||_{2,1} + beta ||C||_F^2  s.t.  H^T = X^T P^T C + E`` with
    an inexact ALM loop using the penalty schedule of `params`."""
    if not beta > 0:
        raise InvalidParameterError("The post-hoc classifier needs beta > 0.")
    PX = P @ X
    if H.shape[1] != PX.shape[1]:
        raise DimensionMismatchError("label matrix columns", PX.shape[1], H.shape[1])
    K, N = PX.shape
    c = H.shape[0]
    C = np.zeros((K, c))
    E = np.zeros((N, c))
    Y = np.zeros((N, c))
    mu = params.mu0
    residual = np.inf
    iteration = 0
    for iteration in range(1, max_iter + 1):
        C = update_c(PX, H, E, Y, mu, beta)
        E = row_shrink(H.T - PX.T @ C + Y / mu, 1 / mu)
        R = classification_residual(H, PX, C, E)
        Y = Y + mu * R
        mu = min(params.eta * mu, params.mu_max)
        check_finite("C", C, iteration, params.divergence_limit)
        check_finite("Y4", Y, iteration, params.divergence_limit)
        residual = float(np.max(np.abs(R)))
        if residual <= tol:
            break
    logger.debug(
        f"Post-hoc classifier: {iteration} iterations, residual {residual:.3g}."
    )
    return ClassifierFit(C, E, iteration, residual)


class Prediction(t.NamedTuple):
    soft: np.ndarray
    hard: int


def _check_samples(model: Model, X: np.ndarray) -> None:
    n = model.P.shape[1]
    if X.shape[0] != n:
        raise DimensionMismatchError("sample dimension", n, X.shape[0])


def embed(model: Model, x: np.ndarray) -> np.ndarray:
    """Coefficients `P x` of a preprocessed sample, or of every column of a batch."""
    x = np.asarray(x, dtype=np.float64)
    _check_samples(model, x)
    return model.P @ x


def _classifier(model: Model) -> np.ndarray:
    if model.C is None:
        raise MissingClassifierError()
    return model.C


def predict(model: Model, x: np.ndarray) -> Prediction:
    """Soft label `C^T P x` and its argmax; ties go to the lowest class."""
    C = _classifier(model)
    soft = C.T @ embed(model, np.asarray(x, dtype=np.float64).reshape(-1))
    return Prediction(soft, int(np.argmax(soft)))


def predict_batch(model: Model, X: np.ndarray) -> t.Tuple[np.ndarray, np.ndarray]:
    """Soft labels (c x m) and hard labels (m) of every column of `X`."""
    C = _classifier(model)
    soft = C.T @ embed(model, X)
    return soft, np.argmax(soft, axis=0)


def accuracy(predictions: t.Sequence[int], truth: t.Sequence[int]) -> float:
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.size != truth.size:
        raise DimensionMismatchError("prediction count", truth.size, predictions.size)
    if truth.size == 0:
        raise InsufficientSamplesError("No samples to evaluate.")
    return float(np.mean(predictions == truth))
