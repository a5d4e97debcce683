"""Command-line interface: fit, predict, cv, simulate, report.

Exit codes: 0 success, 2 missing input file, 3 schema or validation error,
4 numeric failure.  Errors print one machine-readable JSON line to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .artifact import load_model, save_model
from .errors import NumericError, SchemaError
from .ingestion import DesignSpec, load_csv, prepare_training_design
from .model import predict_probabilities
from .report import build_latent_report, format_csv, format_text
from .selection import LambdaPath, cross_validate, evaluate, path_lambda_max
from .simulation import SimulationScenario, records_to_csv, run_study
from .solver import SolverConfig, fit_npmr, fit_ridge

_PENALTY_KIND = {"nuclear": "nuclear", "ridge": "frobenius_squared", "none": "none"}


def _write_text(path, text):
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _lambda_value(text):
    if text == "auto":
        return "auto"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"--lambda must be a number or 'auto', got {text!r}"
        ) from None
    if value < 0:
        raise argparse.ArgumentTypeError("--lambda must be nonnegative")
    return value


def _load_training(args):
    spec = DesignSpec.from_json_file(args.schema)
    table = load_csv(args.train_csv, spec)
    return prepare_training_design(table, spec)


def _choose_lambda(args, dataset, groups, kind):
    lam_max = path_lambda_max(dataset, groups)
    path = LambdaPath.from_lambda_max(lam_max)
    cv = cross_validate(dataset, args.folds, path, kind, seed=args.seed,
                        groups=groups)
    return cv


def cmd_fit(args):
    dataset, groups, encoder = _load_training(args)
    kind = _PENALTY_KIND[args.penalty]
    chosen_by_cv = None
    if kind == "none":
        lam = 0.0
    elif args.lam == "auto":
        chosen_by_cv = _choose_lambda(args, dataset, groups, kind)
        lam = chosen_by_cv.chosen_lambda
    else:
        lam = float(args.lam)

    config = SolverConfig(lam=lam, groups=groups)
    if kind == "frobenius_squared":
        fit, trace = fit_ridge(dataset, config)
    else:
        fit, trace = fit_npmr(dataset, config)

    train_dev, _ = evaluate(fit, dataset)
    diagnostics = {
        "iterations": trace.iterations,
        "converged": trace.converged,
        "halvings": trace.halvings,
        "final_objective": float(fit.objective_trace[-1]),
        "final_rank": fit.final_rank,
        "train_deviance": train_dev,
        "n_train": dataset.n,
        "lambda_by_cv": chosen_by_cv is not None,
    }
    save_model(args.out, fit, dataset.feature_names, dataset.class_names,
               groups=groups, encoder=encoder, diagnostics=diagnostics)

    lines = [
        f"penalty: {args.penalty}",
        f"lambda: {lam!r}",
        f"train deviance: {train_dev!r}",
    ]
    if fit.per_group_rank:
        lines.extend(f"rank[{name}]: {r}" for name, r in fit.per_group_rank.items())
    lines.append(f"rank: {fit.final_rank}")
    lines.append(f"iterations: {trace.iterations}")
    lines.append(f"converged: {str(trace.converged).lower()}")
    lines.append(f"model written: {args.out}")
    print("\n".join(lines))
    return 0


def cmd_predict(args):
    artifact = load_model(args.model)
    if artifact.encoder is None:
        raise SchemaError(f"{args.model}: model carries no column dictionary")
    table = load_csv(args.test_csv, artifact.encoder.spec, require_label=False)
    X, _ = artifact.encoder.transform(table, require_label=False)
    P = predict_probabilities(artifact.alpha, artifact.B, X)
    lines = [",".join(artifact.class_names)]
    lines.extend(",".join(repr(v) for v in row) for row in P)
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_cv(args):
    dataset, groups, _ = _load_training(args)
    kind = _PENALTY_KIND[args.penalty]
    if kind == "none":
        raise ValueError("--penalty none has nothing to cross-validate")
    cv = _choose_lambda(args, dataset, groups, kind)
    lines = ["lambda,mean_deviance,se"]
    for lam, mean, se in zip(cv.lambda_grid, cv.mean_deviance, cv.se_deviance):
        lines.append(f"{lam!r},{mean!r},{se!r}")
    lines.append(f"chosen_lambda,{cv.chosen_lambda!r}")
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_simulate(args):
    scenario = SimulationScenario(
        n_train=args.n_train,
        regime=args.regime,
        n_replicates=args.replicates,
        seed=args.seed,
        n_test=args.n_test,
        p=args.n_features,
        K=args.n_classes,
        latent_rank=args.latent_rank,
    )
    records = run_study(scenario)
    _write_text(args.out, records_to_csv(records))
    return 0


def cmd_report(args):
    artifact = load_model(args.model)
    if artifact.groups is None or not artifact.groups.groups:
        raise ValueError(f"{args.model}: model has no penalized group to report on")
    report = build_latent_report(artifact.B, artifact.groups,
                                 artifact.feature_names, artifact.class_names,
                                 top_m=args.top_m)
    text = format_csv(report) if args.format == "csv" else format_text(report) + "\n"
    _write_text(args.out, text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nuclogit",
        description="Low-rank (nuclear-norm) and ridge multinomial regression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a model and write a model file")
    fit.add_argument("train_csv")
    fit.add_argument("--schema", required=True)
    fit.add_argument("--penalty", choices=("nuclear", "ridge", "none"),
                     default="nuclear")
    fit.add_argument("--lambda", dest="lam", type=_lambda_value, default="auto")
    fit.add_argument("--folds", type=int, default=5)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", required=True)
    fit.set_defaults(func=cmd_fit)

    predict = sub.add_parser("predict", help="per-row class probabilities")
    predict.add_argument("model")
    predict.add_argument("test_csv")
    predict.add_argument("--out")
    predict.set_defaults(func=cmd_predict)

    cv = sub.add_parser("cv", help="cross-validate the penalty level")
    cv.add_argument("train_csv")
    cv.add_argument("--schema", required=True)
    cv.add_argument("--penalty", choices=("nuclear", "ridge"), default="nuclear")
    cv.add_argument("--folds", type=int, default=5)
    cv.add_argument("--seed", type=int, default=0)
    cv.add_argument("--out")
    cv.set_defaults(func=cmd_cv)

    sim = sub.add_parser("simulate", help="synthetic nuclear-vs-ridge study")
    sim.add_argument("--regime", choices=("full_rank", "low_rank"), required=True)
    sim.add_argument("--n-train", type=int, required=True)
    sim.add_argument("--replicates", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--n-test", type=int, default=10_000)
    sim.add_argument("--n-features", type=int, default=12)
    sim.add_argument("--n-classes", type=int, default=8)
    sim.add_argument("--latent-rank", type=int, default=2)
    sim.add_argument("--out")
    sim.set_defaults(func=cmd_simulate)

    report = sub.add_parser("report", help="latent-variable report for a model")
    report.add_argument("model")
    report.add_argument("--top-m", type=int, default=5)
    report.add_argument("--format", choices=("text", "csv"), default="text")
    report.add_argument("--out")
    report.set_defaults(func=cmd_report)

    return parser


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _fail(2, "missing-input", str(exc))
    except SchemaError as exc:
        return _fail(3, "schema", str(exc))
    except ValueError as exc:
        return _fail(3, "validation", str(exc))
    except NumericError as exc:
        return _fail(4, "numeric", str(exc))


if __name__ == "__main__":
    sys.exit(main())
