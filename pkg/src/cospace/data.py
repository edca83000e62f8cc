"""Value types shared across the package: modality matrices, label encodings,
the stacked two-modality system, and per-feature standardization.

Column convention for every stacked quantity: columns ``0..N-1`` hold the
modality-1 samples and columns ``N..2N-1`` the modality-2 samples, in the same
sample order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ValidationError(ValueError):
    """Input rejected before any numerical work (bad shapes, labels, params)."""


class NumericalError(RuntimeError):
    """A numerical routine produced a non-finite or singular result."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModalityMatrix:
    """One modality: features x samples."""

    data: np.ndarray
    modality_id: int = 1

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise ValidationError(f"modality {self.modality_id}: expected a 2-D matrix, got ndim={data.ndim}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValidationError(f"modality {self.modality_id}: empty matrix of shape {data.shape}")
        bad = np.argwhere(~np.isfinite(data))
        if bad.size:
            r, c = bad[0]
            raise ValidationError(f"modality {self.modality_id}: non-finite value at row {r}, col {c}")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def n_features(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


def as_modality(x, modality_id: int = 1) -> ModalityMatrix:
    if isinstance(x, ModalityMatrix):
        return x
    return ModalityMatrix(x, modality_id)


@dataclass(frozen=True)
class LabelEncoding:
    labels: np.ndarray
    num_classes: int
    onehot: np.ndarray
    class_counts: np.ndarray

    @property
    def n_samples(self) -> int:
        return len(self.labels)


def onehot_encode(labels, num_classes: int | None = None) -> LabelEncoding:
    """Encode integer labels in ``[0, C-1]`` as a C x N one-hot matrix.

    Every class must occur at least once, since the supervised graph weights
    divide by the class counts.
    """
    raw = np.asarray(labels)
    if raw.ndim != 1 or raw.size == 0:
        raise ValidationError("labels must be a non-empty 1-D vector")
    if not np.all(np.equal(np.mod(raw, 1), 0)):
        raise ValidationError("labels must be integers")
    y = raw.astype(np.int64)
    if num_classes is None:
        num_classes = int(y.max()) + 1
    if num_classes < 1:
        raise ValidationError("num_classes must be >= 1")
    out_of_range = y[(y < 0) | (y >= num_classes)]
    if out_of_range.size:
        raise ValidationError(f"label {out_of_range[0]} out of range [0, {num_classes - 1}]")
    counts = np.bincount(y, minlength=num_classes)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise ValidationError(f"class {empty[0]} has no samples")
    onehot = np.zeros((num_classes, y.size))
    onehot[y, np.arange(y.size)] = 1.0
    y = y.copy()
    y.setflags(write=False)
    counts.setflags(write=False)
    return LabelEncoding(y, num_classes, _frozen(onehot), counts)


def decode_onehot(onehot: np.ndarray) -> np.ndarray:
    return np.argmax(onehot, axis=0)


@dataclass(frozen=True)
class StackedSystem:
    """Block-diagonal features, duplicated labels and joint Laplacian for 2N samples."""

    x_tilde: np.ndarray
    y_tilde: np.ndarray
    laplacian: np.ndarray
    d1: int
    d2: int
    n_samples: int
    column_order: str = "modality1-then-modality2"

    @property
    def n_features(self) -> int:
        return self.d1 + self.d2


def stack_features(x1, x2) -> np.ndarray:
    x1 = as_modality(x1, 1)
    x2 = as_modality(x2, 2)
    if x1.n_samples != x2.n_samples:
        raise ValidationError(
            f"sample count mismatch: modality 1 has {x1.n_samples}, modality 2 has {x2.n_samples}")
    d1, d2, n = x1.n_features, x2.n_features, x1.n_samples
    x_tilde = np.zeros((d1 + d2, 2 * n))
    x_tilde[:d1, :n] = x1.data
    x_tilde[d1:, n:] = x2.data
    return x_tilde


def build_stacked_system(x1, x2, labels: LabelEncoding, laplacian) -> StackedSystem:
    x1 = as_modality(x1, 1)
    x2 = as_modality(x2, 2)
    x_tilde = stack_features(x1, x2)
    n = x1.n_samples
    if labels.n_samples != n:
        raise ValidationError(f"label count mismatch: {labels.n_samples} labels for {n} samples")
    lap = np.asarray(laplacian, dtype=float)
    if lap.shape != (2 * n, 2 * n):
        raise ValidationError(f"laplacian shape {lap.shape} does not match 2N = {2 * n}")
    if not np.allclose(lap, lap.T, rtol=0, atol=1e-12):
        raise ValidationError("laplacian is not symmetric")
    y_tilde = np.hstack([labels.onehot, labels.onehot])
    return StackedSystem(_frozen(x_tilde), _frozen(y_tilde), _frozen(lap),
                         x1.n_features, x2.n_features, n)


@dataclass(frozen=True)
class Standardizer:
    """Per-feature affine map fitted on training data and reused at test time."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x) -> "Standardizer":
        x = np.asarray(x, dtype=float)
        mean = x.mean(axis=1)
        scale = x.std(axis=1)
        # constant features are only centred
        scale = np.where(scale > 1e-12, scale, 1.0)
        return cls(_frozen(mean), _frozen(scale))

    @classmethod
    def identity(cls, n_features: int) -> "Standardizer":
        return cls(_frozen(np.zeros(n_features)), _frozen(np.ones(n_features)))

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.mean.size:
            raise ValidationError(f"standardizer expects {self.mean.size} features, got {x.shape[0]}")
        return (x - self.mean[:, None]) / self.scale[:, None]

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(_frozen(d["mean"]), _frozen(d["scale"]))


def fit_standardizers(x1, x2, standardize: bool = True) -> tuple[Standardizer, Standardizer]:
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if not standardize:
        return Standardizer.identity(x1.shape[0]), Standardizer.identity(x2.shape[0])
    return Standardizer.fit(x1), Standardizer.fit(x2)


@dataclass(frozen=True)
class Dataset:
    """Co-registered two-modality dataset with integer labels."""

    x1: np.ndarray
    x2: np.ndarray
    labels: np.ndarray
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x1 = as_modality(self.x1, 1)
        x2 = as_modality(self.x2, 2)
        labels = np.asarray(self.labels)
        if x1.n_samples != x2.n_samples:
            raise ValidationError(
                f"sample count mismatch: modality 1 has {x1.n_samples}, modality 2 has {x2.n_samples}")
        if labels.ndim != 1 or labels.size != x1.n_samples:
            raise ValidationError(f"label count mismatch: {labels.size} labels for {x1.n_samples} samples")
        object.__setattr__(self, "x1", x1.data)
        object.__setattr__(self, "x2", x2.data)
        labels = labels.astype(np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.labels.size

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1

    def modality(self, m: int) -> np.ndarray:
        if m == 1:
            return self.x1
        if m == 2:
            return self.x2
        raise ValidationError(f"modality must be 1 or 2, got {m}")
