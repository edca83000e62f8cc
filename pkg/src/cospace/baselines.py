"""Comparison projections: PCA on the stacked data (P-JDR) and locality
preserving projections with an unsupervised kNN graph (L-USMA) or the
supervised same-class graph (L-SMA).

All three return a joint projection ``theta = [theta1, theta2]`` over the
block-diagonal stacked features, so they plug into the same evaluation path
as the CoSpace models.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .data import (NumericalError, Standardizer, ValidationError, as_modality,
                   fit_standardizers, stack_features)
from .graph import build_knn_gaussian_adjacency, build_laplacian, build_supervised_adjacency, stack_labels

log = logging.getLogger(__name__)

METHODS = ("pjdr", "lusma", "lsma")
NULL_EIGENVALUE = 1e-10


@dataclass(frozen=True)
class BaselineModel:
    theta: np.ndarray
    d1: int
    method: str
    hyperparams: dict
    scalers: tuple[Standardizer, Standardizer]
    eigenvalues: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def subspace_dim(self) -> int:
        return self.theta.shape[0]

    @property
    def theta1(self) -> np.ndarray:
        return self.theta[:, :self.d1]

    @property
    def theta2(self) -> np.ndarray:
        return self.theta[:, self.d1:]

    def theta_block(self, modality: int) -> np.ndarray:
        if modality == 1:
            return self.theta1
        if modality == 2:
            return self.theta2
        raise ValidationError(f"modality must be 1 or 2, got {modality}")

    def transform(self, x, modality: int) -> np.ndarray:
        theta_m = self.theta_block(modality)
        z = self.scalers[modality - 1].apply(x)
        return theta_m @ z


def _prepare(x1, x2, standardize):
    x1 = as_modality(x1, 1).data
    x2 = as_modality(x2, 2).data
    scalers = fit_standardizers(x1, x2, standardize)
    x_tilde = stack_features(scalers[0].apply(x1), scalers[1].apply(x2))
    return x_tilde, scalers, x1.shape[0]


def fit_pjdr(x1, x2, d: int, standardize: bool = True) -> BaselineModel:
    """Top-``d`` principal directions of the centred stacked samples."""
    x_tilde, scalers, d1 = _prepare(x1, x2, standardize)
    n_feat = x_tilde.shape[0]
    if not 1 <= d <= n_feat:
        raise ValidationError(f"d must be in [1, {n_feat}], got {d}")
    xc = x_tilde - x_tilde.mean(axis=1, keepdims=True)
    cov = xc @ xc.T / (xc.shape[1] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1]
    evals, evecs = evals[order], evecs[:, order]
    rank = int(np.sum(evals > NULL_EIGENVALUE * max(evals[0], 1.0)))
    if d > rank:
        raise ValidationError(f"d = {d} exceeds the rank {rank} of the stacked data")
    vecs = evecs[:, :d]
    idx = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[idx, np.arange(d)])
    return BaselineModel(vecs.T.copy(), d1, "pjdr", {"d": d}, scalers, evals[:d].copy())


def _lpp(x_tilde, w, d):
    """Smallest non-trivial solutions of ``X L X^T v = lam X D X^T v``."""
    lap = build_laplacian(w).l
    deg = np.diag(w.degrees)
    a = x_tilde @ lap @ x_tilde.T
    b = x_tilde @ deg @ x_tilde.T
    a = 0.5 * (a + a.T)
    b = 0.5 * (b + b.T)
    regularized = bool(np.linalg.cond(b) > 1e12)
    if regularized:
        log.warning("X D X^T is singular; regularizing with 1e-8 I")
        b = b + 1e-8 * np.eye(b.shape[0])
    try:
        evals, evecs = linalg.eigh(a, b)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"LPP generalized eigenproblem failed: {exc}") from None
    diagnostics = {"regularized": regularized}
    keep = np.flatnonzero(evals > NULL_EIGENVALUE)
    if keep.size < d:
        raise ValidationError(f"only {keep.size} non-trivial LPP directions available, requested d = {d}")
    sel = keep[:d]
    vecs = evecs[:, sel]
    if not np.all(np.isfinite(vecs)):
        raise NumericalError("non-finite LPP eigenvectors")
    idx = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[idx, np.arange(d)])
    diagnostics["discarded_null"] = int(np.sum(evals <= NULL_EIGENVALUE))
    return vecs.T.copy(), evals[sel].copy(), diagnostics


def fit_lusma(x1, x2, d: int, k: int, sigma: float, standardize: bool = True) -> BaselineModel:
    """LPP on the stacked block-diagonal samples with a kNN heat-kernel graph."""
    x_tilde, scalers, d1 = _prepare(x1, x2, standardize)
    if not 1 <= d <= x_tilde.shape[0]:
        raise ValidationError(f"d must be in [1, {x_tilde.shape[0]}], got {d}")
    w = build_knn_gaussian_adjacency(x_tilde, k, sigma)
    theta, evals, diag = _lpp(x_tilde, w, d)
    return BaselineModel(theta, d1, "lusma", {"d": d, "k": k, "sigma": sigma}, scalers, evals, diag)


def fit_lsma(x1, x2, labels, d: int, standardize: bool = True) -> BaselineModel:
    """LPP on the stacked samples with the supervised same-class graph."""
    x_tilde, scalers, d1 = _prepare(x1, x2, standardize)
    labels = np.asarray(labels)
    if labels.size != x_tilde.shape[1] // 2:
        raise ValidationError(f"label count mismatch: {labels.size} labels for {x_tilde.shape[1] // 2} samples")
    if not 1 <= d <= x_tilde.shape[0]:
        raise ValidationError(f"d must be in [1, {x_tilde.shape[0]}], got {d}")
    w = build_supervised_adjacency(stack_labels(labels))
    theta, evals, diag = _lpp(x_tilde, w, d)
    return BaselineModel(theta, d1, "lsma", {"d": d}, scalers, evals, diag)


def lpp_matrices(model: BaselineModel, x1, x2, labels=None):
    """Rebuild ``(X L X^T, X D X^T)`` for a fitted LPP model (used to check its eigenpairs)."""
    x_tilde = stack_features(model.scalers[0].apply(x1), model.scalers[1].apply(x2))
    if model.method == "lsma":
        w = build_supervised_adjacency(stack_labels(labels))
    elif model.method == "lusma":
        w = build_knn_gaussian_adjacency(x_tilde, model.hyperparams["k"], model.hyperparams["sigma"])
    else:
        raise ValidationError("pjdr has no graph")
    lap = build_laplacian(w).l
    return x_tilde @ lap @ x_tilde.T, x_tilde @ np.diag(w.degrees) @ x_tilde.T
