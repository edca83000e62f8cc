"""Cross-modality evaluation: projection, linear classification, OA/AA/kappa,
stratified splits, grid-search cross-validation and replicated experiments.

The protocol trains every method on both modalities and scores it on one
modality only (modality 2 by default). Nothing here reads modality-1 columns
outside the training indices.
"""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from sklearn.model_selection import StratifiedKFold

from .baselines import BaselineModel, fit_lsma, fit_lusma, fit_pjdr
from .data import Dataset, Standardizer, ValidationError, as_modality, fit_standardizers
from .solver import AdmmConfig, CoSpaceModel, SolverConfig, fit_cospace

log = logging.getLogger(__name__)

METHODS = ("raw", "pjdr", "lusma", "lsma", "cospace-l2", "cospace-l1")
GRID_KEYS = ("d", "alpha", "beta", "k", "sigma")
METHOD_GRID_KEYS = {
    "raw": (),
    "pjdr": ("d",),
    "lsma": ("d",),
    "lusma": ("d", "k", "sigma"),
    "cospace-l2": ("d", "alpha", "beta"),
    "cospace-l1": ("d", "alpha", "beta"),
}
DEFAULT_PARAMS = {"d": 10, "alpha": 0.1, "beta": 0.1, "k": 10, "sigma": 1.0}


def project_modality(theta_m, x_m) -> np.ndarray:
    theta_m = np.asarray(theta_m, dtype=float)
    x_m = as_modality(x_m).data
    if theta_m.ndim != 2 or theta_m.shape[1] != x_m.shape[0]:
        raise ValidationError(f"projection has {np.shape(theta_m)[-1]} columns but data has {x_m.shape[0]} features")
    return theta_m @ x_m


# --- classifier ---------------------------------------------------------------

@dataclass(frozen=True)
class LinearClassifier:
    """One-vs-rest linear scores ``W x + b``; prediction is the arg-max class."""

    weights: np.ndarray  # classes x features
    bias: np.ndarray
    c: float = 1.0

    def decision_function(self, features) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        if features.shape[0] != self.weights.shape[1]:
            raise ValidationError(f"classifier expects {self.weights.shape[1]} features, got {features.shape[0]}")
        return self.weights @ features + self.bias[:, None]

    def predict(self, features) -> np.ndarray:
        return np.argmax(self.decision_function(features), axis=0)

    def to_dict(self) -> dict:
        # -inf marks a class never seen in training; stored as null
        bias = [None if np.isneginf(b) else float(b) for b in self.bias]
        return {"weights": self.weights.tolist(), "bias": bias, "c": self.c}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearClassifier":
        bias = np.array([-np.inf if b is None else b for b in d["bias"]], dtype=float)
        return cls(np.asarray(d["weights"], dtype=float).reshape(bias.size, -1), bias, float(d["c"]))


def squared_hinge_objective(w, b, features, y, c):
    """``1/2||w||^2 + c * sum max(0, 1 - y (w.x + b))^2`` and its gradient."""
    r = 1.0 - y * (w @ features + b)
    act = r > 0
    ra = r[act]
    value = 0.5 * w @ w + c * ra @ ra
    coef = -2.0 * c * ra * y[act]
    grad_w = w + features[:, act] @ coef
    grad_b = coef.sum()
    return value, grad_w, grad_b


def _train_binary(features, y, c, tol, max_iter=200):
    """Generalized Newton with Armijo backtracking (the loss is piecewise quadratic)."""
    d = features.shape[0]
    aug = np.vstack([features, np.ones(features.shape[1])])
    theta = np.zeros(d + 1)
    reg = np.ones(d + 1)
    reg[-1] = 1e-12  # bias is not penalized; tiny shift keeps the Hessian invertible
    for _ in range(max_iter):
        val, gw, gb = squared_hinge_objective(theta[:-1], theta[-1], features, y, c)
        grad = np.append(gw, gb)
        if np.linalg.norm(grad) <= tol:
            break
        act = 1.0 - y * (theta @ aug) > 0
        a = aug[:, act]
        hess = np.diag(reg) + 2.0 * c * a @ a.T
        step = np.linalg.solve(hess, grad)
        t = 1.0
        slope = grad @ step
        while t > 1e-12:
            cand = theta - t * step
            new_val = squared_hinge_objective(cand[:-1], cand[-1], features, y, c)[0]
            if new_val <= val - 1e-4 * t * slope:
                break
            t *= 0.5
        if t <= 1e-12:
            break
        theta = cand
    return theta[:-1], theta[-1]


def train_linear_classifier(features, labels, num_classes: int | None = None, c: float = 1.0,
                            tol: float = 1e-6) -> LinearClassifier:
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels).astype(np.int64)
    if features.ndim != 2 or features.shape[1] != labels.size:
        raise ValidationError("features must be d x N with one label per column")
    present = np.unique(labels)
    if present.size < 2:
        raise ValidationError("at least two classes are required to train a classifier")
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    weights = np.zeros((num_classes, features.shape[0]))
    bias = np.full(num_classes, -np.inf)
    for k in present:
        y = np.where(labels == k, 1.0, -1.0)
        weights[k], bias[k] = _train_binary(features, y, c, tol)
    # classes absent from training can never be predicted
    return LinearClassifier(weights, bias, c)


# --- metrics ------------------------------------------------------------------

@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, columns = predicted

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValidationError("confusion matrix must be square")
        if np.any(counts < 0) or not np.all(np.equal(np.mod(counts, 1), 0)):
            raise ValidationError("confusion counts must be non-negative integers")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_labels(cls, y_true, y_pred, num_classes: int | None = None) -> "ConfusionMatrix":
        y_true = np.asarray(y_true).astype(np.int64)
        y_pred = np.asarray(y_pred).astype(np.int64)
        if y_true.shape != y_pred.shape:
            raise ValidationError("prediction and truth lengths differ")
        if num_classes is None:
            num_classes = int(max(y_true.max(initial=0), y_pred.max(initial=0))) + 1
        counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        np.add.at(counts, (y_true, y_pred), 1)
        return cls(counts)


@dataclass(frozen=True)
class EvaluationReport:
    oa: float
    aa: float
    kappa: float
    per_class_accuracy: np.ndarray
    confusion: ConfusionMatrix
    replication_mean: dict | None = None
    replication_std: dict | None = None

    def to_dict(self) -> dict:
        out = {
            "oa": self.oa, "aa": self.aa, "kappa": self.kappa,
            "per_class_accuracy": self.per_class_accuracy.tolist(),
            "confusion": self.confusion.counts.tolist(),
        }
        if self.replication_mean is not None:
            out["replication_mean"] = self.replication_mean
            out["replication_std"] = self.replication_std
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls(float(d["oa"]), float(d["aa"]), float(d["kappa"]),
                   np.asarray(d["per_class_accuracy"], dtype=float),
                   ConfusionMatrix(np.asarray(d["confusion"])),
                   d.get("replication_mean"), d.get("replication_std"))


def compute_metrics(confusion) -> EvaluationReport:
    """OA, AA and Cohen's kappa, evaluated in exact rational arithmetic."""
    if not isinstance(confusion, ConfusionMatrix):
        confusion = ConfusionMatrix(confusion)
    counts = [[int(v) for v in row] for row in confusion.counts]
    total = sum(map(sum, counts))
    if total == 0:
        raise ValidationError("confusion matrix is empty")
    c = len(counts)
    rows = [sum(r) for r in counts]
    cols = [sum(counts[i][j] for i in range(c)) for j in range(c)]
    empty = [i for i, r in enumerate(rows) if r == 0]
    if empty:
        raise ValidationError(f"true class {empty[0]} has no samples; average accuracy undefined")
    per_class = [Fraction(counts[i][i], rows[i]) for i in range(c)]
    oa = Fraction(sum(counts[i][i] for i in range(c)), total)
    aa = sum(per_class, Fraction(0)) / c
    pe = Fraction(sum(r * k for r, k in zip(rows, cols)), total * total)
    # p_e = 1 only when every count sits in one diagonal cell: perfect agreement
    kappa = Fraction(1) if pe == 1 else (oa - pe) / (1 - pe)
    return EvaluationReport(float(oa), float(aa), float(kappa),
                            np.array([float(p) for p in per_class]), confusion)


def metrics_from_labels(y_true, y_pred, num_classes: int | None = None) -> EvaluationReport:
    return compute_metrics(ConfusionMatrix.from_labels(y_true, y_pred, num_classes))


# --- splitting ----------------------------------------------------------------

def stratified_split(labels, per_class: int = 200, seed: int = 0):
    """Draw ``per_class`` training indices per class; everything else is test.

    A class with no more than ``per_class`` samples keeps one sample for
    testing and puts the rest in training (with a warning).
    """
    labels = np.asarray(labels).astype(np.int64)
    rng = np.random.default_rng(seed)
    train = []
    for k in np.unique(labels):
        idx = np.flatnonzero(labels == k)
        if idx.size < 2:
            raise ValidationError(f"class {k} has fewer than 2 samples")
        take = per_class
        if idx.size <= per_class:
            take = idx.size - 1
            warnings.warn(f"class {k} has {idx.size} samples; using {take} for training", stacklevel=2)
        train.append(np.sort(rng.choice(idx, size=take, replace=False)))
    train_idx = np.sort(np.concatenate(train))
    mask = np.ones(labels.size, dtype=bool)
    mask[train_idx] = False
    return train_idx, np.flatnonzero(mask)


# --- method dispatch ----------------------------------------------------------

@dataclass(frozen=True)
class RawModel:
    """Original features of the evaluated modality, standardized only."""

    d1: int
    scalers: tuple[Standardizer, Standardizer]
    method: str = "raw"

    def transform(self, x, modality: int) -> np.ndarray:
        if modality not in (1, 2):
            raise ValidationError(f"modality must be 1 or 2, got {modality}")
        return self.scalers[modality - 1].apply(x)


def method_params(method: str, params: dict | None = None) -> dict:
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}")
    params = dict(params or {})
    out = {key: params.get(key, DEFAULT_PARAMS[key]) for key in METHOD_GRID_KEYS[method]}
    for key in ("max_iter", "zeta", "rho", "inner_iter", "inner_tol", "p_inner_iter", "p_inner_tol", "seed"):
        if key in params and method.startswith("cospace"):
            out[key] = params[key]
    return out


def fit_method(method: str, x1, x2, labels, params: dict | None = None, standardize: bool = True):
    p = method_params(method, params)
    if method == "raw":
        x1 = as_modality(x1, 1).data
        return RawModel(x1.shape[0], fit_standardizers(x1, x2, standardize))
    if method == "pjdr":
        return fit_pjdr(x1, x2, int(p["d"]), standardize)
    if method == "lusma":
        return fit_lusma(x1, x2, int(p["d"]), int(p["k"]), float(p["sigma"]), standardize)
    if method == "lsma":
        return fit_lsma(x1, x2, labels, int(p["d"]), standardize)
    admm = AdmmConfig(**{k: p[k] for k in ("rho", "inner_iter", "inner_tol", "p_inner_iter", "p_inner_tol") if k in p})
    extra = {k: p[k] for k in ("max_iter", "zeta", "seed") if k in p}
    config = SolverConfig(alpha=float(p["alpha"]), beta=float(p["beta"]), subspace_dim=int(p["d"]),
                          penalty="ridge" if method == "cospace-l2" else "sparse",
                          admm=admm, standardize=standardize, **extra)
    return fit_cospace(x1, x2, labels, config)


@dataclass(frozen=True)
class Pipeline:
    """A fitted projection plus the linear classifier trained on its features."""

    method: str
    params: dict
    model: CoSpaceModel | BaselineModel | RawModel
    classifier: LinearClassifier
    train_modalities: tuple[int, ...]

    def predict(self, x, modality: int) -> np.ndarray:
        return self.classifier.predict(self.model.transform(x, modality))


def fit_pipeline(method: str, x1, x2, labels, params: dict | None = None, *, standardize: bool = True,
                 train_modalities: tuple[int, ...] = (1, 2), classifier_c: float = 1.0,
                 test_modality: int = 2) -> Pipeline:
    """Fit a projection on both modalities, then a classifier on the projected training features.

    The raw baseline has no shared space, so its classifier sees only
    ``test_modality``.
    """
    labels = np.asarray(labels).astype(np.int64)
    model = fit_method(method, x1, x2, labels, params, standardize)
    if method == "raw":
        train_modalities = (test_modality,)
    xs = {1: x1, 2: x2}
    feats = np.hstack([model.transform(xs[m], m) for m in train_modalities])
    ys = np.concatenate([labels] * len(train_modalities))
    clf = train_linear_classifier(feats, ys, int(labels.max()) + 1, classifier_c)
    return Pipeline(method, method_params(method, params), model, clf, tuple(train_modalities))


# --- cross-validation ---------------------------------------------------------

@dataclass(frozen=True)
class CvGrid:
    d_values: tuple = (10, 20, 30, 40, 50)
    k_values: tuple = (10, 20, 30, 40, 50)
    sigma_values: tuple = (1e-2, 1e-1, 1.0, 1e1, 1e2)
    alpha_values: tuple = (1e-2, 1e-1, 1.0, 1e1, 1e2)
    beta_values: tuple = (1e-2, 1e-1, 1.0, 1e1, 1e2)
    folds: int = 10

    def __post_init__(self):
        for name in ("d_values", "k_values", "sigma_values", "alpha_values", "beta_values"):
            if len(getattr(self, name)) == 0:
                raise ValidationError(f"grid {name} is empty")
        if self.folds < 2:
            raise ValidationError("folds must be >= 2")

    def values(self, key: str) -> tuple:
        return getattr(self, f"{key}_values")

    def points(self, method: str) -> list[dict]:
        keys = METHOD_GRID_KEYS[method]
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.values(k) for k in keys))]

    @classmethod
    def from_dict(cls, d: dict) -> "CvGrid":
        kw = {}
        for key in GRID_KEYS:
            if key in d:
                vals = d[key]
                kw[f"{key}_values"] = tuple(vals if isinstance(vals, (list, tuple)) else [vals])
        if "folds" in d:
            kw["folds"] = int(d["folds"])
        return cls(**kw)


def _tie_key(point: dict) -> tuple:
    return tuple(point.get(k, 0) for k in GRID_KEYS)


@dataclass(frozen=True)
class CvResult:
    best_params: dict
    points: list[dict]
    scores: np.ndarray  # grid points x folds, NaN where a fit failed
    folds: list[tuple[np.ndarray, np.ndarray]] = field(repr=False, default_factory=list)

    @property
    def mean_scores(self) -> np.ndarray:
        return np.array([row.mean() if np.all(np.isfinite(row)) else -np.inf for row in self.scores])


def _feasible(method: str, point: dict, d_total: int, n_train: int) -> bool:
    if "d" in point and point["d"] > d_total:
        return False
    if "k" in point and point["k"] >= 2 * n_train:
        return False
    return True


def cross_validate(x1, x2, labels, method: str, grid: CvGrid = CvGrid(), seed: int = 0,
                   fixed: dict | None = None, *, standardize: bool = True,
                   test_modality: int = 2, classifier_c: float = 1.0) -> CvResult:
    """Stratified k-fold grid search scored by OA on ``test_modality`` of the held-out fold."""
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}")
    x1 = as_modality(x1, 1).data
    x2 = as_modality(x2, 2).data
    labels = np.asarray(labels).astype(np.int64)
    counts = np.bincount(labels)
    if counts[counts > 0].min() < grid.folds:
        raise ValidationError(f"every class needs at least {grid.folds} samples for {grid.folds}-fold CV")
    skf = StratifiedKFold(n_splits=grid.folds, shuffle=True, random_state=seed)
    folds = list(skf.split(np.zeros(labels.size), labels))
    n_train_min = min(tr.size for tr, _ in folds)
    d_total = x1.shape[0] + x2.shape[0]

    points = [p for p in grid.points(method) if _feasible(method, p, d_total, n_train_min)]
    skipped = len(grid.points(method)) - len(points)
    if skipped:
        log.warning("skipping %d infeasible grid points for %s", skipped, method)
    if not points:
        raise ValidationError("no feasible grid point for this dataset")
    xs = {1: x1, 2: x2}
    scores = np.full((len(points), len(folds)), np.nan)
    for i, point in enumerate(points):
        params = {**(fixed or {}), **point}
        for j, (tr, te) in enumerate(folds):
            try:
                pipe = fit_pipeline(method, x1[:, tr], x2[:, tr], labels[tr], params,
                                    standardize=standardize, classifier_c=classifier_c,
                                    test_modality=test_modality)
            except (ValidationError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
                log.warning("grid point %s fold %d failed: %s", point, j, exc)
                continue
            pred = pipe.predict(xs[test_modality][:, te], test_modality)
            scores[i, j] = np.mean(pred == labels[te])
    result = CvResult({}, points, scores, folds)
    means = result.mean_scores
    if not np.any(np.isfinite(means)):
        raise RuntimeError("every grid point failed during cross-validation")
    top = means.max()
    best = min((p for p, m in zip(points, means) if m == top), key=_tie_key)
    return CvResult(dict(best), points, scores, folds)


# --- replicated experiment ----------------------------------------------------

@dataclass(frozen=True)
class ExperimentResult:
    method: str
    params: dict
    reports: list[EvaluationReport]
    summary: EvaluationReport

    @property
    def mean_oa(self) -> float:
        return self.summary.replication_mean["oa"]


def aggregate_reports(reports: list[EvaluationReport]) -> EvaluationReport:
    """Mean/std of OA, AA, kappa; the confusion matrices are summed."""
    if not reports:
        raise ValidationError("no reports to aggregate")
    stats = {}
    for key in ("oa", "aa", "kappa"):
        vals = np.array([getattr(r, key) for r in reports])
        stats[key] = (float(vals.mean()), float(vals.std()))
    per_class = np.mean([r.per_class_accuracy for r in reports], axis=0)
    conf = ConfusionMatrix(np.sum([r.confusion.counts for r in reports], axis=0))
    mean = {k: v[0] for k, v in stats.items()}
    mean["per_class_accuracy"] = per_class.tolist()
    std = {k: v[1] for k, v in stats.items()}
    std["per_class_accuracy"] = np.std([r.per_class_accuracy for r in reports], axis=0).tolist()
    return EvaluationReport(mean["oa"], mean["aa"], mean["kappa"], per_class, conf, mean, std)


def replication_seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence([seed, r]).generate_state(1)[0])


def run_experiment(dataset: Dataset, method: str, params: dict | None = None, replications: int = 10,
                   per_class: int = 200, seed: int = 0, *, standardize: bool = True,
                   test_modality: int = 2, classifier_c: float = 1.0) -> ExperimentResult:
    if replications < 1:
        raise ValidationError("replications must be >= 1")
    labels = dataset.labels
    num_classes = dataset.num_classes
    reports = []
    for r in range(replications):
        tr, te = stratified_split(labels, per_class, replication_seed(seed, r))
        pipe = fit_pipeline(method, dataset.x1[:, tr], dataset.x2[:, tr], labels[tr], params,
                            standardize=standardize, classifier_c=classifier_c, test_modality=test_modality)
        pred = pipe.predict(dataset.modality(test_modality)[:, te], test_modality)
        reports.append(metrics_from_labels(labels[te], pred, num_classes))
    return ExperimentResult(method, method_params(method, params), reports, aggregate_reports(reports))

