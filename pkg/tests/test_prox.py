import numpy as np
import pytest

from rfdl import prox
from rfdl.errors import InvalidParameterError

SEEDS = range(50)


def _shape(rng):
    return int(rng.integers(3, 6)), int(rng.integers(3, 5))


def _is_local_min(objective, Z, rng, trials=20, step=1e-3):
    best = objective(Z)
    for _ in range(trials):
        if objective(Z + step * rng.standard_normal(Z.shape)) < best - 1e-12:
            return False
    return True


def test_soft_threshold():
    M = np.array([[3.0, -0.5], [-2.0, 1.0]])
    np.testing.assert_array_equal(
        prox.soft_threshold(M, 1.0), np.array([[2.0, 0.0], [-1.0, 0.0]])
    )


@pytest.mark.parametrize("seed", SEEDS)
def test_soft_threshold_minimizes_prox_objective(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal(_shape(rng))
    tau = float(rng.uniform(0.1, 1.0))

    def objective(Z):
        return 0.5 * np.sum((Z - M) ** 2) + tau * prox.l1_norm(Z)

    assert _is_local_min(objective, prox.soft_threshold(M, tau), rng)


def test_row_shrink():
    M = np.array([[3.0, 4.0], [0.0, 0.0], [0.3, 0.4]])
    np.testing.assert_allclose(
        prox.row_shrink(M, 1.0), np.array([[2.4, 3.2], [0.0, 0.0], [0.0, 0.0]])
    )


@pytest.mark.parametrize("seed", SEEDS)
def test_row_shrink_minimizes_prox_objective(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal(_shape(rng))
    tau = float(rng.uniform(0.1, 1.5))

    def objective(Z):
        return 0.5 * np.sum((Z - M) ** 2) + tau * prox.l21_norm(Z)

    assert _is_local_min(objective, prox.row_shrink(M, tau), rng)


@pytest.mark.parametrize("seed", SEEDS)
def test_svt_minimizes_prox_objective(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal(_shape(rng))
    tau = float(rng.uniform(0.1, 1.0))

    def objective(Z):
        return 0.5 * np.sum((Z - M) ** 2) + tau * prox.nuclear_norm(Z)

    assert _is_local_min(objective, prox.svt(M, tau), rng)


def test_svt_zero_threshold_copies():
    M = np.arange(6.0).reshape(2, 3)
    Z = prox.svt(M, 0)
    np.testing.assert_array_equal(Z, M)
    assert Z is not M


def test_svt_reduces_rank(rng):
    M = rng.standard_normal((6, 5))
    s = np.linalg.svd(M, compute_uv=False)
    Z = prox.svt(M, float(s[2]))
    assert np.linalg.matrix_rank(Z) == 2
    np.testing.assert_allclose(
        np.linalg.svd(Z, compute_uv=False)[:2], s[:2] - s[2], atol=1e-12
    )


def test_svt_large_threshold_is_zero(rng):
    M = rng.standard_normal((4, 4))
    assert not np.any(prox.svt(M, 1e6))


@pytest.mark.parametrize("seed", range(100))
def test_reweight_diag_identity(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal(_shape(rng))
    M[np.linalg.norm(M, axis=1) < 1e-3] += 1e-2
    w = prox.reweight_diag(M, 1e-8)
    lhs = 2 * np.trace(M.T @ (w[:, np.newaxis] * M))
    assert lhs == pytest.approx(prox.l21_norm(M), rel=1e-10)


def test_reweight_diag_floor():
    M = np.zeros((2, 3))
    M[0, 0] = 2.0
    np.testing.assert_allclose(prox.reweight_diag(M, 0.5), [0.25, 1.0])


def test_norms(rng):
    M = rng.standard_normal((4, 3))
    assert prox.l21_norm(M) == pytest.approx(np.sum(np.linalg.norm(M, axis=1)))
    assert prox.l1_norm(M) == pytest.approx(np.abs(M).sum())
    assert prox.nuclear_norm(M) == pytest.approx(np.linalg.norm(M, ord="nuc"))
    assert prox.nuclear_norm(np.zeros((0, 3))) == 0.0


@pytest.mark.parametrize(
    "func", [prox.soft_threshold, prox.row_shrink, prox.svt], ids=lambda f: f.__name__
)
def test_negative_threshold(func):
    with pytest.raises(InvalidParameterError):
        func(np.ones((2, 2)), -1.0)


def test_nonpositive_floor():
    with pytest.raises(InvalidParameterError):
        prox.reweight_diag(np.ones((2, 2)), 0.0)


@pytest.mark.parametrize("func", [prox.soft_threshold, prox.row_shrink], ids=lambda f: f.__name__)
@pytest.mark.parametrize("seed", range(20))
def test_shrinkage_is_nonexpansive(func, seed):
    rng = np.random.default_rng(seed)
    shape = _shape(rng)
    A = rng.standard_normal(shape)
    B = A + rng.uniform(0.01, 2.0) * rng.standard_normal(shape)
    tau = float(rng.uniform(0.0, 1.5))
    distance = np.linalg.norm(func(A, tau) - func(B, tau))
    assert distance <= np.linalg.norm(A - B) * (1 + 1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_svt_spectrum_and_rank(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 4))
    Z = prox.svt(M, float(rng.uniform(0.0, 1.0)))
    s = np.linalg.svd(M, compute_uv=False)
    assert np.max(np.linalg.svd(Z, compute_uv=False)) <= s[0] * (1 + 1e-12)
    assert np.linalg.matrix_rank(Z) <= np.linalg.matrix_rank(M)


def test_reweight_diag_zero_matrix():
    w = prox.reweight_diag(np.zeros((3, 4)), 1e-8)
    np.testing.assert_allclose(w, 5e7)
    assert np.all(np.isfinite(w)) and np.all(w > 0)


def test_reweight_diag_row():
    np.testing.assert_allclose(prox.reweight_diag(np.array([[3.0, 4.0]]), 1e-8), [0.1])
