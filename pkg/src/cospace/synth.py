"""Paired-modality synthetic data with a shared Gaussian latent.

Each sample draws ``z = mu_class + e`` with ``e ~ N(0, I)`` in ``latent_dim``
dimensions, and each modality observes ``x_m = A_m z + noise_m`` through a map
with orthonormal columns, so ``A_m^T x_m`` recovers ``z`` exactly when noise is
zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ValidationError


@dataclass(frozen=True)
class SynthSpec:
    latent_dim: int = 5
    d1: int = 12
    d2: int = 9
    num_classes: int = 4
    per_class: int = 300
    separation: float = 3.0
    noise: float | tuple[float, float] = 0.5
    seed: int = 0
    max_attempts: int = 2000

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValidationError("latent_dim must be >= 1")
        if self.latent_dim > min(self.d1, self.d2):
            raise ValidationError(f"latent_dim {self.latent_dim} exceeds min(d1, d2) = {min(self.d1, self.d2)}")
        if self.num_classes < 1 or self.per_class < 1:
            raise ValidationError("num_classes and per_class must be >= 1")
        if not self.separation > 0:
            raise ValidationError("separation must be positive")
        if min(self.noise_levels) < 0:
            raise ValidationError("noise std must be non-negative")

    @property
    def noise_levels(self) -> tuple[float, float]:
        if np.ndim(self.noise) == 0:
            return float(self.noise), float(self.noise)
        a, b = self.noise
        return float(a), float(b)


def orthonormal_columns(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def draw_class_means(rng: np.random.Generator, num_classes: int, dim: int, separation: float,
                     max_attempts: int = 2000) -> np.ndarray:
    """Sequential rejection sampling in a ball; every pair ends up at least ``separation`` apart."""
    radius = separation * max(1.0, num_classes ** (1.0 / dim))
    means: list[np.ndarray] = []
    attempts = 0
    while len(means) < num_classes:
        if attempts >= max_attempts:
            raise ValidationError(
                f"could not place {num_classes} class means {separation} apart in {dim} dimensions")
        attempts += 1
        direction = rng.standard_normal(dim)
        direction /= np.linalg.norm(direction)
        cand = direction * radius * rng.random() ** (1.0 / dim)
        if all(np.linalg.norm(cand - m) >= separation for m in means):
            means.append(cand)
    return np.array(means).T


def generate_with_maps(spec: SynthSpec):
    """Like :func:`generate` but also returns the modality maps ``(A1, A2)``."""
    rng = np.random.default_rng(spec.seed)
    means = draw_class_means(rng, spec.num_classes, spec.latent_dim, spec.separation, spec.max_attempts)
    a1 = orthonormal_columns(rng, spec.d1, spec.latent_dim)
    a2 = orthonormal_columns(rng, spec.d2, spec.latent_dim)
    labels = np.repeat(np.arange(spec.num_classes), spec.per_class)
    z = means[:, labels] + rng.standard_normal((spec.latent_dim, labels.size))
    tau1, tau2 = spec.noise_levels
    x1 = a1 @ z + tau1 * rng.standard_normal((spec.d1, labels.size))
    x2 = a2 @ z + tau2 * rng.standard_normal((spec.d2, labels.size))
    return x1, x2, labels, z, a1, a2


def generate(spec: SynthSpec):
    """Returns ``(x1, x2, labels, z)`` with features x samples matrices."""
    return generate_with_maps(spec)[:4]
