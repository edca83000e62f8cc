import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cospace.data import ValidationError
from cospace.graph import (build_knn_gaussian_adjacency, build_laplacian, build_supervised_adjacency,
                           stack_labels, supervised_laplacian)


def test_supervised_examples():
    np.testing.assert_array_equal(build_supervised_adjacency([0, 0]).w, [[0, 0.5], [0.5, 0]])
    np.testing.assert_array_equal(build_supervised_adjacency([0, 1]).w, np.zeros((2, 2)))
    w = build_supervised_adjacency([0, 0, 1]).w
    expected = np.zeros((3, 3))
    expected[0, 1] = expected[1, 0] = 0.5
    np.testing.assert_array_equal(w, expected)


def test_empty_class_rejected():
    with pytest.raises(ValidationError, match="count 0"):
        build_supervised_adjacency([0, 2], class_counts=[1, 0, 0])


def test_counts_over_stacked_labels():
    w = build_supervised_adjacency(stack_labels([0, 0, 1])).w
    # class 0 occurs 4 times in the stacked vector
    assert w[0, 1] == w[0, 3] == w[0, 4] == 0.25
    assert w[2, 5] == 0.5


def test_laplacian_examples():
    np.testing.assert_array_equal(build_laplacian(np.array([[0, 0.5], [0.5, 0]])).l,
                                  [[0.5, -0.5], [-0.5, 0.5]])
    np.testing.assert_array_equal(build_laplacian(np.zeros((3, 3))).l, np.zeros((3, 3)))


def test_knn_collinear_example():
    w = build_knn_gaussian_adjacency(np.array([[0.0, 1.0, 3.0]]), k=1, sigma=1.0).w
    assert w[0, 1] == w[1, 0] == pytest.approx(np.exp(-0.5), abs=1e-15)
    assert w[1, 2] == w[2, 1] == pytest.approx(np.exp(-2.0), abs=1e-15)
    assert w[0, 2] == 0 and w[2, 0] == 0


def test_knn_identical_points_and_wide_kernel():
    w = build_knn_gaussian_adjacency(np.array([[2.0, 2.0]]), k=1, sigma=0.3).w
    assert w[0, 1] == 1.0
    w = build_knn_gaussian_adjacency(np.array([[0.0, 5.0]]), k=1, sigma=1e8).w
    assert w[0, 1] == pytest.approx(1.0, abs=1e-12)


def test_knn_errors():
    x = np.zeros((1, 3))
    with pytest.raises(ValidationError):
        build_knn_gaussian_adjacency(x, k=3, sigma=1.0)
    with pytest.raises(ValidationError):
        build_knn_gaussian_adjacency(x, k=1, sigma=0.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=2, max_size=20), st.integers(0, 10_000))
def test_laplacian_properties(labels, seed):
    labels = np.array(labels)
    lap = supervised_laplacian(labels)
    m = 2 * labels.size
    assert lap.shape == (m, m)
    np.testing.assert_allclose(lap.sum(axis=1), 0, atol=1e-10)
    np.testing.assert_array_equal(lap, lap.T)
    assert np.linalg.eigvalsh(lap).min() >= -1e-10
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((3, m))
    w = np.diag(np.diag(lap)) - lap
    pairwise = 0.5 * sum(w[i, j] * np.sum((z[:, i] - z[:, j]) ** 2) for i in range(m) for j in range(m))
    assert np.trace(z @ lap @ z.T) == pytest.approx(pairwise, rel=1e-8, abs=1e-12)
