"""Adjacency graphs and Laplacians for the trace regularizer and the LPP baselines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .data import NumericalError, ValidationError


@dataclass(frozen=True)
class AdjacencyMatrix:
    w: np.ndarray
    kind: str  # "supervised" | "knn-gaussian"

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValidationError(f"adjacency must be square, got shape {w.shape}")
        if not np.array_equal(w, w.T):
            raise ValidationError("adjacency is not symmetric")
        if np.any(w < 0) or np.any(np.diag(w) != 0):
            raise ValidationError("adjacency must be non-negative with a zero diagonal")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def degrees(self) -> np.ndarray:
        return self.w.sum(axis=1)


@dataclass(frozen=True)
class LaplacianMatrix:
    l: np.ndarray

    @property
    def degree(self) -> np.ndarray:
        return np.diag(self.l).copy()


def stack_labels(labels) -> np.ndarray:
    """Labels of the 2N stacked samples (the original vector, twice)."""
    labels = np.asarray(labels)
    return np.concatenate([labels, labels])


def build_supervised_adjacency(stacked_labels, class_counts=None) -> AdjacencyMatrix:
    """Same-class samples are linked with weight ``1 / N_k``.

    ``N_k`` counts class ``k`` in ``stacked_labels`` itself unless
    ``class_counts`` is given. Self-loops are dropped so that ``L 1 = 0``.
    """
    y = np.asarray(stacked_labels).astype(np.int64)
    if y.ndim != 1 or y.size == 0:
        raise ValidationError("stacked_labels must be a non-empty 1-D vector")
    if np.any(y < 0):
        raise ValidationError("labels must be non-negative")
    if class_counts is None:
        class_counts = np.bincount(y)
    class_counts = np.asarray(class_counts, dtype=float)
    if y.max() >= class_counts.size:
        raise ValidationError(f"label {y.max()} has no class count")
    used = np.unique(y)
    if np.any(class_counts[used] <= 0):
        k = used[class_counts[used] <= 0][0]
        raise ValidationError(f"class {k} has count 0")
    same = y[:, None] == y[None, :]
    w = np.where(same, 1.0 / class_counts[y][:, None], 0.0)
    np.fill_diagonal(w, 0.0)
    return AdjacencyMatrix(w, "supervised")


def build_knn_gaussian_adjacency(x, k: int, sigma: float) -> AdjacencyMatrix:
    """Heat-kernel kNN graph over the columns of ``x`` (features x samples).

    An edge is kept when either endpoint lists the other among its ``k``
    nearest neighbours; the kernel is symmetric so no averaging is needed.
    """
    x = np.asarray(x, dtype=float)
    m = x.shape[1]
    if not 1 <= k < m:
        raise ValidationError(f"k must satisfy 1 <= k < M = {m}, got {k}")
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    d2 = cdist(x.T, x.T, "sqeuclidean")
    if not np.all(np.isfinite(d2)):
        raise NumericalError("non-finite pairwise distances")
    masked = d2.copy()
    np.fill_diagonal(masked, np.inf)
    nn = np.argsort(masked, axis=1, kind="stable")[:, :k]
    mask = np.zeros((m, m), dtype=bool)
    mask[np.repeat(np.arange(m), k), nn.ravel()] = True
    mask |= mask.T
    w = np.where(mask, np.exp(-d2 / (2.0 * sigma**2)), 0.0)
    np.fill_diagonal(w, 0.0)
    return AdjacencyMatrix(w, "knn-gaussian")


def build_laplacian(w) -> LaplacianMatrix:
    if not isinstance(w, AdjacencyMatrix):
        w = AdjacencyMatrix(w, "supervised")
    a = w.w
    lap = np.diag(a.sum(axis=1)) - a
    lap.setflags(write=False)
    return LaplacianMatrix(lap)


def supervised_laplacian(labels) -> np.ndarray:
    """Joint Laplacian for the stacked system built from per-sample labels."""
    return build_laplacian(build_supervised_adjacency(stack_labels(labels))).l
