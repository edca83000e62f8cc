"""Command-line entry point: ``cospace {synth,fit,eval,cv,metrics,experiment}``.

Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or validation
error. Failures print a single ``cospace: error: <kind>: <reason>`` line on
stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .data import NumericalError, ValidationError
from .evaluation import (METHOD_GRID_KEYS, METHODS, CvGrid, cross_validate, fit_pipeline,
                         metrics_from_labels, run_experiment, stratified_split)
from .solver import CoSpaceModel
from .synth import SynthSpec, generate

log = logging.getLogger("cospace")

FIT_METHODS = ("cospace-l2", "cospace-l1", "pjdr", "lusma", "lsma", "raw")


class UsageError(ValidationError):
    pass


def _method(name: str, allowed=METHODS) -> str:
    if name not in allowed:
        raise UsageError(f"unknown method {name!r} (expected one of {', '.join(allowed)})")
    return name


def _params(args) -> dict:
    out = {}
    for key, attr in (("d", "dim"), ("alpha", "alpha"), ("beta", "beta"), ("k", "k"), ("sigma", "sigma"),
                      ("max_iter", "max_iter"), ("zeta", "zeta"), ("seed", "seed")):
        val = getattr(args, attr, None)
        if val is not None:
            out[key] = val
    return out


def _add_param_flags(p):
    p.add_argument("--dim", type=int, help="subspace dimension d")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--k", type=int, help="kNN neighbours (lusma)")
    p.add_argument("--sigma", type=float, help="heat-kernel width (lusma)")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--zeta", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-standardize", action="store_true")


def _grid(spec: str | None) -> CvGrid:
    if spec is None:
        return CvGrid()
    path = Path(spec)
    text = path.read_text(encoding="utf-8") if path.exists() else spec
    try:
        return CvGrid.from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise UsageError(f"--grid is neither a file nor JSON: {exc}") from None


def cmd_synth(args) -> int:
    spec = SynthSpec(latent_dim=args.latent_dim, d1=args.d1, d2=args.d2, num_classes=args.classes,
                     per_class=args.samples_per_class, separation=args.separation, noise=args.noise,
                     seed=args.seed)
    x1, x2, labels, z = generate(spec)
    out = Path(args.out)
    manifest = io.write_dataset(out, x1, x2, labels, name=f"synth-seed{args.seed}", fmt=args.format,
                                notes="synthetic shared-latent dataset",
                                extra={"synth": {k: getattr(spec, k) for k in
                                                 ("latent_dim", "d1", "d2", "num_classes", "per_class",
                                                  "separation", "noise", "seed")}})
    io.write_matrix(out / ("latent.cmx" if args.format == "binary" else "latent.csv"), z, args.format)
    print(manifest)
    return 0


def _subset(dataset, per_class, seed):
    if per_class is None:
        return dataset.x1, dataset.x2, dataset.labels
    tr, _ = stratified_split(dataset.labels, per_class, seed)
    return dataset.x1[:, tr], dataset.x2[:, tr], dataset.labels[tr]


def cmd_fit(args) -> int:
    method = _method(args.method, FIT_METHODS)
    dataset = io.load_manifest(args.manifest).load()
    x1, x2, y = _subset(dataset, args.per_class, args.seed)
    params = _params(args)
    pipe = fit_pipeline(method, x1, x2, y, params, standardize=not args.no_standardize)
    io.save_pipeline(args.out, pipe)
    log_path = Path(args.log) if args.log else Path(str(args.out) + ".log.jsonl")
    with open(log_path, "w", encoding="utf-8") as fh:
        model = pipe.model
        if isinstance(model, CoSpaceModel):
            for t, e in enumerate(model.history):
                fh.write(json.dumps({"event": "iteration", "iter": t, "objective": float(e)}) + "\n")
        fh.write(json.dumps({
            "event": "done", "method": method, "params": pipe.params,
            "converged": getattr(model, "converged", None),
            "iterations_used": getattr(model, "iterations_used", None),
            "diagnostics": getattr(model, "diagnostics", {}),
        }) + "\n")
    print(args.out)
    return 0


def cmd_eval(args) -> int:
    pipe = io.load_pipeline(args.model)
    manifest = io.load_manifest(args.manifest)
    # only the requested modality is read from disk
    x = manifest.load_modality(args.modality)
    y = manifest.load_labels()
    pred = pipe.predict(x, args.modality)
    report = metrics_from_labels(y, pred, max(manifest.n_classes, pipe.classifier.weights.shape[0]))
    payload = {"method": pipe.method, "modality": args.modality, "n_samples": int(y.size), **report.to_dict()}
    io.save_json(args.out, payload)
    if args.labels_out:
        io.write_labels(args.labels_out, pred)
    print(json.dumps({"oa": report.oa, "aa": report.aa, "kappa": report.kappa}))
    return 0


def cmd_cv(args) -> int:
    method = _method(args.method)
    dataset = io.load_manifest(args.manifest).load()
    x1, x2, y = _subset(dataset, args.per_class, args.seed)
    grid = _grid(args.grid)
    if args.folds is not None:
        grid = CvGrid(**{**grid.__dict__, "folds": args.folds})
    fixed = {k: v for k, v in _params(args).items() if k not in METHOD_GRID_KEYS[method] and k != "seed"}
    result = cross_validate(x1, x2, y, method, grid, seed=args.seed, fixed=fixed,
                            standardize=not args.no_standardize)
    out = Path(args.out)
    table = Path(args.table) if args.table else out.with_suffix(".folds.csv")
    keys = METHOD_GRID_KEYS[method]
    with open(table, "w", encoding="utf-8") as fh:
        fh.write(",".join([*keys, *(f"fold{j}" for j in range(result.scores.shape[1])), "mean"]) + "\n")
        for point, row, mean in zip(result.points, result.scores, result.mean_scores):
            cells = [repr(point[k]) for k in keys] + [repr(float(v)) for v in row] + [repr(float(mean))]
            fh.write(",".join(cells) + "\n")
    io.save_json(out, {"method": method, "best_params": result.best_params, "folds": grid.folds,
                       "seed": args.seed, "grid_points": len(result.points), "fold_table": str(table),
                       "best_mean_oa": float(result.mean_scores.max())})
    print(json.dumps(result.best_params))
    return 0


def cmd_metrics(args) -> int:
    pred = io.read_labels(args.pred)
    truth = io.read_labels(args.truth)
    if pred.size != truth.size:
        raise ValidationError(f"{pred.size} predictions for {truth.size} labels")
    report = metrics_from_labels(truth, pred)
    io.save_json(args.out, report.to_dict())
    print(json.dumps({"oa": report.oa, "aa": report.aa, "kappa": report.kappa}))
    return 0


def cmd_experiment(args) -> int:
    method = _method(args.method)
    dataset = io.load_manifest(args.manifest).load()
    result = run_experiment(dataset, method, _params(args), replications=args.replications,
                            per_class=args.per_class, seed=args.seed, standardize=not args.no_standardize)
    io.save_json(args.out, {"method": method, "params": result.params, "replications": args.replications,
                            "per_class": args.per_class, "seed": args.seed,
                            "summary": result.summary.to_dict(),
                            "runs": [r.to_dict() for r in result.reports]})
    print(json.dumps(result.summary.replication_mean | {"std_oa": result.summary.replication_std["oa"]}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cospace", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic paired-modality dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--latent-dim", type=int, default=5)
    p.add_argument("--d1", type=int, default=12)
    p.add_argument("--d2", type=int, default=9)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--samples-per-class", type=int, default=300)
    p.add_argument("--separation", type=float, default=3.0)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("binary", "text"), default="binary")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit a model on both modalities")
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--out", required=True, help="model file (JSON)")
    p.add_argument("--log", help="run log (JSON lines); default <out>.log.jsonl")
    p.add_argument("--per-class", type=int, help="fit on a stratified subset of this many samples per class")
    _add_param_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate a fitted model on one modality")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--modality", type=int, choices=(1, 2), default=2)
    p.add_argument("--out", required=True, help="report file (JSON)")
    p.add_argument("--labels-out", help="write predicted labels, one per line")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv", help="k-fold grid search")
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--grid", help="JSON object or file, e.g. '{\"d\": [10, 20], \"alpha\": [0.1]}'")
    p.add_argument("--folds", type=int)
    p.add_argument("--per-class", type=int, help="run CV on a stratified training subset")
    p.add_argument("--out", required=True)
    p.add_argument("--table", help="fold-score CSV; default <out>.folds.csv")
    _add_param_flags(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("metrics", help="OA/AA/kappa from predictions and truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("experiment", help="replicated split/fit/evaluate protocol")
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--replications", type=int, default=10)
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--out", required=True)
    _add_param_flags(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"cospace: error: validation: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"cospace: error: numeric: {exc}", file=sys.stderr)
        return 1
    except (OSError, RuntimeError) as exc:
        print(f"cospace: error: runtime: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
