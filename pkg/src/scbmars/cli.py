"""Command-line interface.

Subcommands: fit, predict, simulate, bench, importance, pdp, calibrate.
Exit status is 0 on success, 1 on a usage error (bad flags or arguments),
and 2 on a runtime failure (bad data, missing file, unsupported model).
Diagnostics go to standard error; data goes to the requested files.
``SCBMARS_OUT_DIR`` sets the default bench output directory and
``SCBMARS_THREADS`` the default worker count.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .archive import load_model, save_model
from .bench import BenchConfig, run_bench, write_results
from .dataio import (
    load_dataset_csv,
    load_features_csv,
    save_dataset_csv,
    save_predictions_csv,
    save_table_csv,
)
from .estimators import ESTIMATOR_NAMES, make_estimator
from .interpret import partial_dependence, subgroup_calibration, variable_importance
from .simulate import SCENARIOS, draw_scenario

__all__ = ["main", "build_parser"]


def _propensity_arg(text: str) -> str:
    if text in ("rf", "logistic"):
        return text
    if text.startswith("known:"):
        try:
            value = float(text[len("known:"):])
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"{text!r}: expected known:<value> with a numeric value"
            ) from None
        if not 0.0 < value < 1.0:
            raise argparse.ArgumentTypeError(
                f"known propensity {value} must lie strictly inside (0, 1)"
            )
        return text
    raise argparse.ArgumentTypeError(
        f"{text!r} is not one of rf, logistic, known:<value>"
    )


def _add_estimator_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", choices=ESTIMATOR_NAMES, default="scbm")
    p.add_argument(
        "--propensity",
        type=_propensity_arg,
        default="rf",
        help="rf, logistic, or known:<value> (e.g. known:0.5)",
    )
    p.add_argument("--b", type=int, default=25,
                   help="bootstrap replicates for bagged variants")
    p.add_argument("--m-max", type=int, default=10)
    p.add_argument("--k-max", type=int, default=2)
    p.add_argument("--min-active", type=int, default=5)
    p.add_argument("--strata", type=int, default=5,
                   help="propensity strata (bcm only)")
    p.add_argument("--clip-eps", type=float, default=0.01)
    p.add_argument("--cv-folds", type=int, default=5)
    p.add_argument("--n-lambda", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)


def _estimator_from_args(args):
    kwargs = {
        "m_max": args.m_max,
        "k_max": args.k_max,
        "min_active": args.min_active,
        "random_state": args.seed,
    }
    if args.variant in ("scbm", "prop0", "prop1"):
        kwargs.update(
            n_replicates=args.b,
            propensity=args.propensity,
            clip_epsilon=args.clip_eps,
            n_folds=args.cv_folds,
            n_lambda=args.n_lambda,
        )
    elif args.variant == "bcm":
        kwargs.update(
            n_replicates=args.b,
            n_strata=args.strata,
            propensity=args.propensity,
        )
    return make_estimator(args.variant, **kwargs)


def _parse_settings(text: str):
    settings = []
    for part in text.split(","):
        try:
            n_str, p_str = part.lower().split("x")
            settings.append((int(n_str), int(p_str)))
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"setting {part!r} is not of the form NxP (e.g. 200x50)"
            ) from None
    return settings


def _parse_int_list(text: str):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"{text!r} is not a comma-separated integer list"
        ) from None


def _parse_estimators(text: str):
    out = []
    for v in text.split(","):
        v = v.strip()
        if v not in ESTIMATOR_NAMES:
            raise argparse.ArgumentTypeError(f"unknown estimator {v!r}")
        out.append(v)
    return out


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="scbmars",
        description="Heterogeneous treatment-effect estimation with bagged "
        "hinge bases and grouped shrinkage.",
    )
    top.add_argument("--version", action="version", version=f"scbmars {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model on a CSV data set")
    p.add_argument("--data", required=True, help="CSV with features, t, y")
    p.add_argument("--treatment-column", default=None,
                   help="treatment column name (default: t or treatment)")
    p.add_argument("--outcome-column", default=None,
                   help="outcome column name (default: y or outcome)")
    p.add_argument("--out", required=True, help="model archive to write (JSON)")
    _add_estimator_options(p)

    p = sub.add_parser("predict", help="predict effects with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True,
                   help="CSV of features (t/y columns are ignored if present)")
    p.add_argument("--arm", type=int, choices=(0, 1), default=None,
                   help="write outcome predictions for this arm instead of "
                   "effect estimates")
    p.add_argument("--out", required=True, help="predictions CSV to write")

    p = sub.add_parser("simulate", help="draw a benchmark scenario to CSV")
    p.add_argument("--scenario", type=int, required=True,
                   choices=list(SCENARIOS), metavar="1..12")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--regime", choices=("auto", "rct", "observational"),
                   default="auto",
                   help="assignment law override (default: the scenario's own)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth", action="store_true",
                   help="include tau, mu and e columns")
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="run the simulation benchmark")
    p.add_argument("--scenarios", type=_parse_int_list, default=list(SCENARIOS),
                   help="comma-separated scenario numbers (default all 12)")
    p.add_argument("--settings", type=_parse_settings, default=[(200, 50)],
                   help="comma-separated NxP pairs, e.g. 200x50,500x100")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--estimators", type=_parse_estimators,
                   default=list(ESTIMATOR_NAMES))
    p.add_argument("--b", type=int, default=10,
                   help="bootstrap replicates inside each bagged estimator")
    p.add_argument("--test-n", type=int, default=1000)
    p.add_argument("--strata", type=int, default=5,
                   help="bcm strata for the confounded scenarios")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("SCBMARS_THREADS", "1")))
    p.add_argument("--out-dir",
                   default=os.environ.get("SCBMARS_OUT_DIR", "bench_out"))
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("importance", help="variable importance of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="training CSV (features, t, y)")
    p.add_argument("--mode", choices=("zero", "refit"), default="zero")
    p.add_argument("--out", required=True)

    p = sub.add_parser("pdp", help="partial dependence of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--variable", required=True,
                   help="feature name (e.g. x3) or 1-based index")
    p.add_argument("--target", choices=("effect", "outcome"), default="effect")
    p.add_argument("--arm", type=int, choices=(0, 1), default=None)
    p.add_argument("--grid", type=int, default=25)
    p.add_argument("--out", required=True)

    p = sub.add_parser("calibrate", help="half-sample subgroup calibration")
    p.add_argument("--data", required=True)
    p.add_argument("--groups", type=int, default=4)
    p.add_argument("--replications", type=int, default=20)
    p.add_argument("--out", required=True)
    _add_estimator_options(p)

    return top


def _resolve_variable(token: str, names) -> int:
    if token in names:
        return names.index(token)
    try:
        idx = int(token)
    except ValueError:
        raise ValueError(
            f"variable {token!r} is neither a feature name nor an index"
        ) from None
    if not 1 <= idx <= len(names):
        raise ValueError(f"variable index {idx} out of range 1..{len(names)}")
    return idx - 1


def _model_needs_training_data(model, ds):
    """Interpretation tools read the training sample off the model."""
    model.X_, model.y_, model.t_ = (
        np.asarray(ds.covariates, dtype=float),
        np.asarray(ds.outcome, dtype=float),
        np.asarray(ds.treatment, dtype=int),
    )
    return model


def _cmd_fit(args) -> int:
    ds = load_dataset_csv(
        args.data,
        treatment_column=args.treatment_column,
        outcome_column=args.outcome_column,
    )
    model = _estimator_from_args(args)
    model.fit(ds.covariates, ds.outcome, ds.treatment)
    save_model(args.out, model)
    print(f"wrote {args.out}")
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    X, _ = load_features_csv(args.data)
    if args.arm is None:
        save_predictions_csv(args.out, model.predict(X))
    else:
        save_predictions_csv(
            args.out,
            model.predict_outcome(X, args.arm),
            column=f"y{args.arm}_hat",
        )
    print(f"wrote {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    regime = None if args.regime == "auto" else args.regime
    draw = draw_scenario(args.scenario, args.n, args.p, seed=args.seed,
                         regime=regime)
    extra = None
    if args.truth:
        extra = {"tau": draw.tau, "mu": draw.mu, "e": draw.propensity}
    save_dataset_csv(args.out, draw.X, draw.treatment, draw.outcome, extra=extra)
    print(f"wrote {args.out}")
    return 0


def _cmd_bench(args) -> int:
    cfg = BenchConfig(
        scenarios=tuple(args.scenarios),
        sizes=tuple(tuple(s) for s in args.settings),
        n_reps=args.reps,
        variants=tuple(args.estimators),
        n_test=args.test_n,
        n_replicates=args.b,
        n_strata_observational=args.strata,
        seed=args.seed,
        n_jobs=max(1, args.threads),
    )
    progress = None
    if not args.quiet:
        def progress(cell):
            scenario, n, p, rep = cell
            print(f"done scenario {scenario} n={n} p={p} rep {rep}",
                  file=sys.stderr, flush=True)
    result = run_bench(cfg, progress=progress)
    for path in write_results(result, args.out_dir):
        print(f"wrote {path}")
    return 0


def _cmd_importance(args) -> int:
    model = load_model(args.model)
    ds = load_dataset_csv(args.data)
    _model_needs_training_data(model, ds)
    res = variable_importance(model, mode=args.mode)
    names = ds.names()
    rows = [
        {"variable": names[j], "raw": float(res.raw[j]),
         "normalized": float(res.normalized[j])}
        for j in range(len(names))
    ]
    save_table_csv(args.out, ("variable", "raw", "normalized"), rows)
    print(f"wrote {args.out}")
    return 0


def _cmd_pdp(args) -> int:
    model = load_model(args.model)
    ds = load_dataset_csv(args.data)
    _model_needs_training_data(model, ds)
    j = _resolve_variable(args.variable, list(ds.names()))
    res = partial_dependence(
        model, j, X=ds.covariates, target=args.target, arm=args.arm,
        n_grid=args.grid,
    )
    rows = [
        {"value": float(g), "mean_prediction": float(v)}
        for g, v in zip(res.grid, res.values)
    ]
    save_table_csv(args.out, ("value", "mean_prediction"), rows)
    print(f"wrote {args.out}")
    return 0


def _cmd_calibrate(args) -> int:
    ds = load_dataset_csv(args.data)
    estimator = _estimator_from_args(args)
    res = subgroup_calibration(
        estimator, ds.covariates, ds.outcome, ds.treatment,
        n_groups=args.groups, n_replications=args.replications, seed=args.seed,
    )
    rows = [
        {
            "group": g + 1,
            "mean_predicted": float(res.mean_predicted[g]),
            "mean_ate": float(res.mean_ate[g]),
            "n_valid": int(res.n_valid[g]),
        }
        for g in range(res.n_groups)
    ]
    save_table_csv(args.out, ("group", "mean_predicted", "mean_ate", "n_valid"), rows)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "simulate": _cmd_simulate,
    "bench": _cmd_bench,
    "importance": _cmd_importance,
    "pdp": _cmd_pdp,
    "calibrate": _cmd_calibrate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage and 0 for --help/--version; fold
        # the former into this tool's usage status
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
