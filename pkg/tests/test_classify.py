import numpy as np
import pytest

from rfdl import classify
from rfdl.config import HyperParams
from rfdl.errors import DimensionMismatchError
from rfdl.errors import InsufficientSamplesError
from rfdl.errors import InvalidParameterError
from rfdl.errors import LabelDomainError
from rfdl.errors import MissingClassifierError
from rfdl.model import Model


def test_build_label_matrix():
    H = classify.build_label_matrix([2, 0, 1, 0], 3)
    np.testing.assert_array_equal(
        H,
        [
            [0, 1, 0, 1],
            [0, 0, 1, 0],
            [1, 0, 0, 0],
        ],
    )
    np.testing.assert_array_equal(H.sum(axis=0), 1)


@pytest.mark.parametrize("labels, c", [([0, 3], 3), ([-1, 0], 2), ([0], 0)])
def test_build_label_matrix_domain(labels, c):
    with pytest.raises(LabelDomainError):
        classify.build_label_matrix(labels, c)


def _model(C=None):
    P = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    D = np.ones((1, 3)) / 1.0
    return Model("djrfdl", P, D, C=C)


def test_predict():
    C = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    model = _model(C)
    prediction = classify.predict(model, np.array([0.2, 0.9]))
    np.testing.assert_allclose(prediction.soft, [0.2, 0.9])
    assert prediction.hard == 1


def test_predict_ties_go_to_lowest_class():
    model = _model(np.zeros((3, 4)))
    assert classify.predict(model, np.array([1.0, 2.0])).hard == 0


def test_predict_batch_matches_predict(rng):
    model = _model(rng.standard_normal((3, 4)))
    X = rng.standard_normal((2, 7))
    soft, hard = classify.predict_batch(model, X)
    assert soft.shape == (4, 7)
    for j in range(7):
        single = classify.predict(model, X[:, j])
        np.testing.assert_allclose(soft[:, j], single.soft)
        assert hard[j] == single.hard


def test_embed():
    model = _model()
    np.testing.assert_allclose(classify.embed(model, np.array([1.0, 2.0])), [1.0, 2.0, 3.0])
    with pytest.raises(DimensionMismatchError, match="expected dimension 2, got 3"):
        classify.embed(model, np.ones(3))


def test_predict_without_classifier():
    with pytest.raises(MissingClassifierError):
        classify.predict(_model(), np.ones(2))


def test_accuracy():
    assert classify.accuracy([0, 1, 2, 2], [0, 1, 1, 2]) == 0.75
    with pytest.raises(DimensionMismatchError):
        classify.accuracy([0, 1], [0])
    with pytest.raises(InsufficientSamplesError):
        classify.accuracy([], [])


def test_posthoc_classifier_separable(rng):
    # two well separated clusters in coefficient space
    labels = np.repeat([0, 1], 10)
    X = np.vstack([labels == 0, labels == 1]).astype(float)
    X += 0.05 * rng.standard_normal(X.shape)
    P = np.eye(2)
    H = classify.build_label_matrix(labels, 2)
    fit = classify.fit_posthoc_classifier(P, X, H, beta=1e-3, params=HyperParams())
    assert fit.C.shape == (2, 2)
    assert fit.E.shape == (20, 2)
    assert 1 <= fit.iterations <= classify.POSTHOC_MAX_ITER
    hard = np.argmax(fit.C.T @ (P @ X), axis=0)
    assert classify.accuracy(hard, labels) == 1.0


def test_posthoc_classifier_needs_beta(rng):
    H = classify.build_label_matrix([0, 1], 2)
    with pytest.raises(InvalidParameterError):
        classify.fit_posthoc_classifier(np.eye(2), np.eye(2), H, beta=0.0)
    with pytest.raises(DimensionMismatchError):
        classify.fit_posthoc_classifier(np.eye(2), np.eye(2), np.ones((2, 3)), beta=1.0)
