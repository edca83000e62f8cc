"""File formats: matrices (CSV text or ``CMX1`` binary), dataset manifests,
serialized models and evaluation reports.

Matrices are stored features x samples, i.e. one sample per column. The binary
layout is the 4-byte magic ``CMX1``, three little-endian uint64 values
(rows, cols, reserved = 0), then rows*cols little-endian float64 values in
row-major order.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import BaselineModel
from .data import Dataset, Standardizer, ValidationError
from .evaluation import EvaluationReport, LinearClassifier, Pipeline, RawModel
from .solver import CoSpaceModel

MAGIC = b"CMX1"
_HEADER = struct.Struct("<4sQQQ")
MODEL_FORMAT = "cospace-model"


def _check_finite(a: np.ndarray, path) -> None:
    bad = np.argwhere(~np.isfinite(a))
    if bad.size:
        r, c = bad[0]
        raise ValidationError(f"{path}: non-finite value at row {r}, col {c}")


def write_matrix(path, a, fmt: str = "binary", header: str | None = None) -> None:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    path = Path(path)
    if fmt == "binary":
        rows, cols = a.shape
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, rows, cols, 0))
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes(order="C"))
    elif fmt == "text":
        np.savetxt(path, a, fmt="%.17g", delimiter=",",
                   header=header if header is not None else f"rows={a.shape[0]} cols={a.shape[1]}",
                   comments="# ")
    else:
        raise ValidationError(f"unknown matrix format {fmt!r}")


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if head[:4] == MAGIC:
            if len(head) < _HEADER.size:
                raise ValidationError(f"{path}: truncated header")
            _, rows, cols, reserved = _HEADER.unpack(head)
            if reserved != 0:
                raise ValidationError(f"{path}: reserved header field is {reserved}, expected 0")
            payload = fh.read()
            if len(payload) != 8 * rows * cols:
                raise ValidationError(f"{path}: expected {rows * cols} values, found {len(payload) // 8}")
            a = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(float)
            _check_finite(a, path)
            return a
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if lines and lines[0].startswith("#"):
        lines = lines[1:]
    rows = [ln for ln in lines if ln.strip()]
    if not rows:
        raise ValidationError(f"{path}: empty matrix file")
    try:
        a = np.array([[float(v) for v in ln.split(",")] for ln in rows])
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if a.ndim != 2:
        raise ValidationError(f"{path}: ragged rows")
    _check_finite(a, path)
    return a


def read_labels(path) -> np.ndarray:
    a = read_matrix(path)
    if 1 not in a.shape:
        raise ValidationError(f"{path}: labels must be a single row or column, got shape {a.shape}")
    y = a.ravel()
    if not np.all(y == np.round(y)) or np.any(y < 0):
        raise ValidationError(f"{path}: labels must be non-negative integers")
    return y.astype(np.int64)


def write_labels(path, labels) -> None:
    labels = np.asarray(labels).astype(np.int64)
    Path(path).write_text("".join(f"{int(v)}\n" for v in labels), encoding="utf-8")


# --- manifests ----------------------------------------------------------------

@dataclass(frozen=True)
class DatasetManifest:
    modality1: Path
    modality2: Path
    labels: Path
    d1: int
    d2: int
    n_samples: int
    n_classes: int
    name: str = ""
    notes: str = ""

    def load_modality(self, m: int) -> np.ndarray:
        if m not in (1, 2):
            raise ValidationError(f"modality must be 1 or 2, got {m}")
        path = self.modality1 if m == 1 else self.modality2
        a = read_matrix(path)
        want = (self.d1 if m == 1 else self.d2, self.n_samples)
        if a.shape != want:
            raise ValidationError(f"{path}: shape {a.shape} does not match declared {want}")
        return a

    def load_labels(self) -> np.ndarray:
        y = read_labels(self.labels)
        if y.size != self.n_samples:
            raise ValidationError(f"{self.labels}: {y.size} labels, declared {self.n_samples}")
        if y.max() >= self.n_classes:
            raise ValidationError(f"{self.labels}: label {y.max()} exceeds declared class count {self.n_classes}")
        return y

    def load(self) -> Dataset:
        return Dataset(self.load_modality(1), self.load_modality(2), self.load_labels(), self.name)


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid manifest JSON ({exc})") from None
    base = path.parent
    try:
        return DatasetManifest(
            modality1=base / raw["modality1"], modality2=base / raw["modality2"], labels=base / raw["labels"],
            d1=int(raw["d1"]), d2=int(raw["d2"]), n_samples=int(raw["n_samples"]),
            n_classes=int(raw["n_classes"]), name=raw.get("name", ""), notes=raw.get("notes", ""))
    except KeyError as exc:
        raise ValidationError(f"{path}: manifest missing field {exc}") from None


def write_dataset(directory, x1, x2, labels, *, name: str = "", notes: str = "", fmt: str = "binary",
                  extra: dict | None = None) -> Path:
    """Write both modalities, the labels and a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ext = "cmx" if fmt == "binary" else "csv"
    write_matrix(directory / f"modality1.{ext}", x1, fmt)
    write_matrix(directory / f"modality2.{ext}", x2, fmt)
    write_labels(directory / "labels.txt", labels)
    labels = np.asarray(labels)
    manifest = {
        "name": name, "notes": notes,
        "modality1": f"modality1.{ext}", "modality2": f"modality2.{ext}", "labels": "labels.txt",
        "d1": int(np.shape(x1)[0]), "d2": int(np.shape(x2)[0]),
        "n_samples": int(labels.size), "n_classes": int(labels.max()) + 1,
    }
    if extra:
        manifest.update(extra)
    out = directory / "manifest.json"
    out.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return out


# --- models -------------------------------------------------------------------

def _matrix(v):
    return None if v is None else np.asarray(v, dtype=float)


def pipeline_to_dict(pipe: Pipeline) -> dict:
    model = pipe.model
    out = {
        "format": MODEL_FORMAT, "version": 1,
        "method": pipe.method, "params": pipe.params,
        "train_modalities": list(pipe.train_modalities),
        "d1": int(model.scalers[0].mean.size), "d2": int(model.scalers[1].mean.size),
        "scalers": [s.to_dict() for s in model.scalers],
        "classifier": pipe.classifier.to_dict(),
        "theta": None, "p": None,
    }
    if isinstance(model, CoSpaceModel):
        out.update(theta=model.theta.tolist(), p=model.p.tolist(), penalty=model.penalty,
                   history=model.history.tolist(), converged=model.converged,
                   iterations_used=model.iterations_used, diagnostics=model.diagnostics)
    elif isinstance(model, BaselineModel):
        out.update(theta=model.theta.tolist(),
                   eigenvalues=None if model.eigenvalues is None else model.eigenvalues.tolist(),
                   diagnostics=model.diagnostics)
    return out


def pipeline_from_dict(d: dict) -> Pipeline:
    if d.get("format") != MODEL_FORMAT:
        raise ValidationError("not a cospace model file")
    scalers = tuple(Standardizer.from_dict(s) for s in d["scalers"])
    method = d["method"]
    if method == "raw":
        model = RawModel(int(d["d1"]), scalers)
    elif method.startswith("cospace"):
        model = CoSpaceModel(
            theta=_matrix(d["theta"]), p=_matrix(d["p"]), d1=int(d["d1"]), penalty=d["penalty"],
            alpha=float(d["params"]["alpha"]), beta=float(d["params"]["beta"]),
            history=np.asarray(d["history"], dtype=float), converged=bool(d["converged"]),
            iterations_used=int(d["iterations_used"]), scalers=scalers, diagnostics=d.get("diagnostics", {}))
    else:
        ev = d.get("eigenvalues")
        model = BaselineModel(_matrix(d["theta"]), int(d["d1"]), method, d["params"], scalers,
                              None if ev is None else np.asarray(ev, dtype=float), d.get("diagnostics", {}))
    return Pipeline(method, d["params"], model, LinearClassifier.from_dict(d["classifier"]),
                    tuple(d["train_modalities"]))


def save_pipeline(path, pipe: Pipeline) -> None:
    Path(path).write_text(json.dumps(pipeline_to_dict(pipe), allow_nan=False) + "\n", encoding="utf-8")


def load_pipeline(path) -> Pipeline:
    try:
        return pipeline_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError) as exc:
        raise ValidationError(f"{path}: malformed model file ({exc})") from None


def save_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def load_report(path) -> EvaluationReport:
    return EvaluationReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
