"""Inexact augmented Lagrangian solvers for J-RFDL and DJ-RFDL.

Every iteration runs one sweep of proximal and closed-form block updates,
then advances the multipliers and the penalty parameter mu.
"""
import csv
import enum
import logging
import math
import time
import typing as t
from dataclasses import dataclass
from dataclasses import field
from dataclasses import fields

import numpy as np

from rfdl.classify import build_label_matrix
from rfdl.classify import fit_posthoc_classifier
from rfdl.config import HyperParams
from rfdl.dictsolve import classification_residual
from rfdl.dictsolve import normalize_columns
from rfdl.dictsolve import solve_spd
from rfdl.dictsolve import update_c
from rfdl.dictsolve import update_d
from rfdl.dictsolve import update_e
from rfdl.dictsolve import update_p_djrfdl
from rfdl.dictsolve import update_p_jrfdl
from rfdl.errors import DataError
from rfdl.errors import DimensionMismatchError
from rfdl.errors import InsufficientSamplesError
from rfdl.errors import InvalidParameterError
from rfdl.errors import check_finite
from rfdl.factorize import cf_objective
from rfdl.factorize import cf_step
from rfdl.factorize import factor_residual
from rfdl.factorize import gram
from rfdl.factorize import robust_wv_step
from rfdl.factorize import update_g
from rfdl.fs import atomic_write
from rfdl.logging import progress_bar
from rfdl.model import Model
from rfdl.prox import l1_norm
from rfdl.prox import l21_norm
from rfdl.prox import nuclear_norm
from rfdl.prox import reweight_diag
from rfdl.prox import soft_threshold
from rfdl.prox import svt

logger = logging.getLogger(__name__)


class StopReason(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    COMPLETED = "completed"
    """Ran a fixed number of steps without a convergence test."""


@dataclass
class SolverState:
    """Every live matrix of one solver run. Q and G are stored as vectors."""

    params: HyperParams
    D: np.ndarray
    P: np.ndarray
    W: np.ndarray
    V: np.ndarray
    J: np.ndarray
    S: np.ndarray
    F: np.ndarray
    Q: np.ndarray
    G: np.ndarray
    Y1: np.ndarray
    Y2: np.ndarray
    Y3: np.ndarray
    mu: float
    iter: int = 0
    C: t.Optional[np.ndarray] = None
    E: t.Optional[np.ndarray] = None
    Y4: t.Optional[np.ndarray] = None

    @property
    def joint(self) -> bool:
        """Whether the classification block is part of the iteration."""
        return self.C is not None

    def matrices(self) -> t.Iterator[t.Tuple[str, np.ndarray]]:
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, np.ndarray):
                yield f.name, value

    def copy(self) -> "SolverState":
        copied = {
            f.name: (
                getattr(self, f.name).copy()
                if isinstance(getattr(self, f.name), np.ndarray)
                else getattr(self, f.name)
            )
            for f in fields(self)
        }
        return SolverState(**copied)


class Residuals(t.NamedTuple):
    pxj: float
    pxs: float
    vf: float
    cls: t.Optional[float] = None

    @property
    def max(self) -> float:
        values = [self.pxj, self.pxs, self.vf]
        if self.cls is not None:
            values.append(self.cls)
        return max(values)


class TraceRow(t.NamedTuple):
    iter: int
    res_max: float
    res_pxj: t.Optional[float]
    res_pxs: t.Optional[float]
    res_vf: t.Optional[float]
    res_cls: t.Optional[float]
    objective: float
    mu: t.Optional[float]
    wall_time_s: float


TRACE_COLUMNS = TraceRow._fields


@dataclass
class ConvergenceTrace:
    rows: t.List[TraceRow] = field(default_factory=list)
    stop_reason: t.Optional[StopReason] = None

    def __len__(self) -> int:
        return len(self.rows)

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    @property
    def iterations(self) -> int:
        return len(self.rows)

    @property
    def final_residual(self) -> float:
        return self.rows[-1].res_max if self.rows else math.inf

    @property
    def converged(self) -> bool:
        return self.stop_reason in (StopReason.CONVERGED, StopReason.COMPLETED)

    @property
    def mean_iteration_time(self) -> float:
        if not self.rows:
            return 0.0
        return sum(row.wall_time_s for row in self.rows) / len(self.rows)

    def to_csv(self, path: str) -> None:
        with atomic_write(path) as file:
            writer = csv.writer(file, lineterminator="\n")
            writer.writerow(TRACE_COLUMNS)
            for row in self.rows:
                writer.writerow(_csv_value(value) for value in row)


def _csv_value(value: t.Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def default_rank(N: int, n: int, classes: t.Optional[int] = None) -> int:
    if classes:
        return max(1, min(2 * classes, N, n))
    return max(1, min(math.ceil(N / 10), n))


def init_state(
    X: np.ndarray,
    params: HyperParams,
    classes: t.Optional[int] = None,
    joint: bool = True,
) -> SolverState:
    """Random nonnegative D, P, W, V from the seeded generator; every auxiliary
    and multiplier at zero; Q and G at the identity.

    `classes` selects the labelled default factor rank. The classification
    block (C, E, Y4) is allocated when `classes` is given and `joint` is set."""
    if X.ndim != 2 or min(X.shape) < 1:
        raise DataError("Training data must be a nonempty matrix.")
    if not np.all(np.isfinite(X)):
        raise DataError("Training data contains non-finite values.")
    params.validate()
    n, N = X.shape
    K = params.dict_size or N
    r = params.factor_rank or default_rank(N, n, classes)
    if r > min(n, N):
        raise InvalidParameterError(
            f"Factor rank {r} exceeds min(n, N) = {min(n, N)}."
        )
    if K > N:
        logger.warning(f"Dictionary size {K} exceeds the number of samples {N}.")

    rng = np.random.default_rng(params.seed)
    D = normalize_columns(rng.uniform(size=(r, K)))
    P = rng.uniform(size=(K, n))
    W = rng.uniform(size=(N, r))
    V = rng.uniform(size=(N, r))
    state = SolverState(
        params=params,
        D=D,
        P=P,
        W=W,
        V=V,
        J=np.zeros((K, N)),
        S=np.zeros((K, N)),
        F=np.zeros((N, r)),
        Q=np.ones(r),
        G=np.ones(N),
        Y1=np.zeros((N, r)),
        Y2=np.zeros((K, N)),
        Y3=np.zeros((K, N)),
        mu=params.mu0,
    )
    if classes is not None and joint:
        state.C = np.zeros((K, classes))
        state.E = np.zeros((N, classes))
        state.Y4 = np.zeros((N, classes))
    return state


def step_auxiliaries(state: SolverState, X: np.ndarray) -> None:
    """Proximal updates of the low-rank J, sparse S and sparse F."""
    params, mu = state.params, state.mu
    PX = state.P @ X
    state.J = svt(PX + state.Y2 / mu, params.gamma / mu)
    state.S = soft_threshold(PX + state.Y3 / mu, params.gamma / mu)
    state.F = soft_threshold(state.V + state.Y1 / mu, params.alpha / mu)


def step_multipliers(
    state: SolverState, X: np.ndarray, H: t.Optional[np.ndarray] = None
) -> None:
    mu = state.mu
    PX = state.P @ X
    state.Y1 = state.Y1 + mu * (state.V - state.F)
    state.Y2 = state.Y2 + mu * (PX - state.J)
    state.Y3 = state.Y3 + mu * (PX - state.S)
    if state.joint:
        assert H is not None and state.Y4 is not None
        state.Y4 = state.Y4 + mu * classification_residual(H, PX, state.C, state.E)
    state.mu = min(state.params.eta * mu, state.params.mu_max)


def _inf_norm(M: np.ndarray) -> float:
    return float(np.max(np.abs(M))) if M.size else 0.0


def residuals(
    state: SolverState, X: np.ndarray, H: t.Optional[np.ndarray] = None
) -> Residuals:
    """Elementwise infinity norms of the constraint residuals."""
    PX = state.P @ X
    cls = None
    if state.joint and H is not None:
        cls = _inf_norm(classification_residual(H, PX, state.C, state.E))
    return Residuals(
        _inf_norm(PX - state.J),
        _inf_norm(PX - state.S),
        _inf_norm(state.V - state.F),
        cls,
    )


def objective(
    state: SolverState, X: np.ndarray, H: t.Optional[np.ndarray] = None
) -> float:
    """The unrelaxed objective at the primal variables (PX for J and S, V for F)."""
    params = state.params
    PX = state.P @ X
    value = l21_norm(factor_residual(X, state.W, state.V))
    if params.alpha:
        value += params.alpha * (
            l21_norm(state.V.T - state.D @ PX) + l1_norm(state.V)
        )
    if params.gamma:
        value += params.gamma * (nuclear_norm(PX) + l1_norm(PX))
    if state.joint and H is not None:
        assert state.C is not None
        value += params.beta * (
            l21_norm(H.T - PX.T @ state.C) + float(np.sum(state.C**2))
        )
    return value


def check_state(state: SolverState) -> None:
    limit = state.params.divergence_limit
    for name, value in state.matrices():
        check_finite(name, value, state.iter, limit)


def _reweight(state: SolverState, X: np.ndarray) -> None:
    if not state.params.reweight:
        return
    floor = state.params.floor
    state.Q = reweight_diag(state.V.T - state.D @ (state.P @ X), floor)
    state.G = update_g(X, state.W, state.V, floor)


def iterate(
    state: SolverState, X: np.ndarray, A: np.ndarray, H: t.Optional[np.ndarray] = None
) -> None:
    """One full sweep, multipliers and penalty included.

    J-RFDL order: J, S, F, D, P, W, V, Q and G. With the classification block
    the projection moves after V, and C then E follow Q and G."""
    params = state.params
    step_auxiliaries(state, X)
    state.D = update_d(state.V, X, state.P, state.Q, params.tau)
    if state.joint:
        assert H is not None
        robust_wv_step(A, state, X)
        state.P = update_p_djrfdl(state, X, H)
        _reweight(state, X)
        PX = state.P @ X
        state.C = update_c(PX, H, state.E, state.Y4, state.mu, params.beta)
        state.E = update_e(H, X, state.P, state.C, state.Y4, state.mu, params.beta)
    else:
        state.P = update_p_jrfdl(state, X)
        robust_wv_step(A, state, X)
        _reweight(state, X)
    step_multipliers(state, X, H)


def _solve(
    X: np.ndarray,
    params: HyperParams,
    H: t.Optional[np.ndarray],
    label: str,
    progress: bool,
    classes: t.Optional[int] = None,
) -> t.Tuple[SolverState, ConvergenceTrace]:
    if H is not None:
        classes = H.shape[0]
    state = init_state(X, params, classes, joint=H is not None)
    A = gram(X)
    trace = ConvergenceTrace()
    logger.debug(
        f"{label}: n={X.shape[0]} N={X.shape[1]} K={state.P.shape[0]} r={state.V.shape[1]}."
    )
    with progress_bar(params.max_iter, label, enabled=progress, delay=0.5) as bar:
        for k in range(1, params.max_iter + 1):
            state.iter = k
            mu = state.mu
            start = time.perf_counter()
            iterate(state, X, A, H)
            check_state(state)
            res = residuals(state, X, H)
            elapsed = time.perf_counter() - start
            trace.append(
                TraceRow(
                    iter=k,
                    res_max=res.max,
                    res_pxj=res.pxj,
                    res_pxs=res.pxs,
                    res_vf=res.vf,
                    res_cls=res.cls,
                    objective=objective(state, X, H),
                    mu=mu,
                    wall_time_s=elapsed,
                )
            )
            logger.debug(f"iter {k}: residual {res.max:.3e}, mu {mu:.3e}")
            bar.set_postfix_str(f"res={res.max:.2e} mu={mu:.1e}", refresh=False)
            bar.update()
            if res.max <= params.eps:
                trace.stop_reason = StopReason.CONVERGED
                break
        else:
            trace.stop_reason = StopReason.MAX_ITER

    if trace.stop_reason is StopReason.CONVERGED:
        logger.info(f"{label} converged in {len(trace)} iterations.")
    else:
        logger.warning(
            f"{label} reached max_iter={params.max_iter} with residual "
            + f"{trace.final_residual:.3e} > eps={params.eps:g}."
        )
    return state, trace


def fit_jrfdl(
    X: np.ndarray,
    params: HyperParams,
    classes: t.Optional[int] = None,
    progress: bool = True,
) -> t.Tuple[Model, ConvergenceTrace]:
    """Learn P and D without labels.

    `classes` only selects the labelled default factor rank."""
    state, trace = _solve(X, params, None, "J-RFDL", progress, classes)
    return Model("jrfdl", state.P, state.D, params), trace


def label_matrix(
    labels: t.Sequence[int], classes: t.Optional[int], N: int
) -> np.ndarray:
    """Label matrix of a training set; every class needs at least one sample."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size != N:
        raise DimensionMismatchError("label count", N, labels.size)
    if classes is None:
        classes = int(labels.max()) + 1 if labels.size else 0
    H = build_label_matrix(labels, classes)
    empty = np.flatnonzero(H.sum(axis=1) == 0)
    if empty.size:
        raise InsufficientSamplesError(f"Class {int(empty[0])} has no training samples.")
    return H


def fit_djrfdl(
    X: np.ndarray,
    labels: t.Sequence[int],
    params: HyperParams,
    classes: t.Optional[int] = None,
    progress: bool = True,
) -> t.Tuple[Model, ConvergenceTrace]:
    """Jointly learn P, D and the classifier C.

    With beta = 0 the classification block is left out of the iteration, so
    P and D follow J-RFDL exactly, and C is fit once afterwards by ridge least
    squares on PX."""
    H = label_matrix(labels, classes, X.shape[1])
    c = H.shape[0]
    if params.beta == 0:
        state, trace = _solve(X, params, None, "DJ-RFDL", progress, c)
        zeros = np.zeros((X.shape[1], c))
        C = update_c(state.P @ X, H, zeros, zeros, 1.0, 0.0, ridge=params.tau)
    else:
        state, trace = _solve(X, params, H, "DJ-RFDL", progress)
        C = state.C
    return Model("djrfdl", state.P, state.D, params, C=C), trace


def fit_cf_baseline(
    X: np.ndarray,
    params: HyperParams,
    classes: t.Optional[int] = None,
    progress: bool = True,
) -> t.Tuple[Model, ConvergenceTrace]:
    """Plain concept factorization for `max_iter` steps from the seeded W, V.

    The inductive map is the least-squares coefficient map on the concept
    basis XW, `P = (W^T A W + tau I)^-1 W^T X^T`, with an identity dictionary."""
    state = init_state(X, params, classes, joint=False)
    A = gram(X)
    W, V = state.W, state.V
    trace = ConvergenceTrace()
    with progress_bar(params.max_iter, "CF", enabled=progress, delay=0.5) as bar:
        for k in range(1, params.max_iter + 1):
            start = time.perf_counter()
            W_next, V_next = cf_step(A, W, V)
            check_finite("W", W_next, k, params.divergence_limit)
            check_finite("V", V_next, k, params.divergence_limit)
            change = max(_inf_norm(W_next - W), _inf_norm(V_next - V))
            W, V = W_next, V_next
            trace.append(
                TraceRow(
                    iter=k,
                    res_max=change,
                    res_pxj=None,
                    res_pxs=None,
                    res_vf=None,
                    res_cls=None,
                    objective=cf_objective(X, W, V),
                    mu=None,
                    wall_time_s=time.perf_counter() - start,
                )
            )
            bar.update()
    trace.stop_reason = StopReason.COMPLETED

    r = W.shape[1]
    lhs = W.T @ A @ W
    if params.tau:
        lhs = lhs + params.tau * np.eye(r)
    P = solve_spd(lhs, W.T @ X.T, "the baseline projection", strict=not params.tau)
    return Model("cf_baseline", P, np.eye(r), params), trace


def fit(
    method: str,
    X: np.ndarray,
    params: HyperParams,
    labels: t.Optional[t.Sequence[int]] = None,
    classes: t.Optional[int] = None,
    progress: bool = True,
) -> t.Tuple[Model, ConvergenceTrace]:
    """Train `method` on `X`. Methods without a joint classifier get the
    post-hoc one when labels are given."""
    if method == "djrfdl":
        if labels is None:
            raise InvalidParameterError("DJ-RFDL needs training labels.")
        return fit_djrfdl(X, labels, params, classes, progress)

    H = None
    if labels is not None:
        H = label_matrix(labels, classes, X.shape[1])
        classes = H.shape[0]
    if method == "jrfdl":
        model, trace = fit_jrfdl(X, params, classes, progress)
    elif method == "cf_baseline":
        model, trace = fit_cf_baseline(X, params, classes, progress)
    else:
        raise InvalidParameterError(f"Unknown method '{method}'.")
    if H is not None:
        result = fit_posthoc_classifier(model.P, X, H, params.beta, params)
        model = model.with_classifier(result.C)
    return model, trace


class CostReport(t.NamedTuple):
    formula: str
    terms: t.Dict[str, int]
    estimate: int
    mean_iteration_s: t.Optional[float]


def per_iteration_cost_report(
    params: HyperParams,
    shapes: t.Tuple[int, int],
    trace: t.Optional[ConvergenceTrace] = None,
    classes: t.Optional[int] = None,
) -> CostReport:
    """Dominant per-iteration cost `O(K^3 + nNr + n^3)` of an n x N problem,
    with the measured mean iteration time if a trace is given."""
    n, N = shapes
    if n < 1 or N < 1:
        raise InvalidParameterError(f"Cannot estimate the cost of an empty {n}x{N} problem.")
    K = params.dict_size or N
    r = params.factor_rank or default_rank(N, n, classes)
    terms = {"K^3": K**3, "nNr": n * N * r, "n^3": n**3}
    return CostReport(
        "O(K^3 + nNr + n^3)",
        terms,
        sum(terms.values()),
        trace.mean_iteration_time if trace is not None and len(trace) else None,
    )
