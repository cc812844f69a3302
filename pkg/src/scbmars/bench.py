"""Benchmark driver: scenarios x sizes x estimators, replicated.

Each (scenario, n, p, replication) cell draws an independent training set
and a test set from the same law, fits every requested estimator on the
training data, and scores the predicted effect against the true tau on the
test points. Cell seeds are derived from the master seed and the cell
coordinates, so results do not depend on execution order or worker count,
and rows are emitted in a canonical sort order.
"""

from __future__ import annotations

import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimators import ESTIMATOR_NAMES, make_estimator
from .simulate import SCENARIOS, draw_scenario, is_randomized

__all__ = ["BenchConfig", "BenchResult", "mse", "abs_bias", "run_bench",
           "run_cell", "summarize", "long_rows", "write_results"]

_SIZE_INDEX_CAP = 1_000_000  # spawn keys must be non-negative ints


def mse(tau_hat, tau_true) -> float:
    """Mean squared difference between predicted and true effects."""
    a = np.asarray(tau_hat, dtype=float).ravel()
    b = np.asarray(tau_true, dtype=float).ravel()
    if a.shape != b.shape or a.size == 0:
        raise ValueError("tau_hat and tau_true must share a positive length")
    d = a - b
    return float(np.mean(d * d))


def abs_bias(tau_hat, tau_true) -> float:
    """Absolute value of the mean prediction error."""
    a = np.asarray(tau_hat, dtype=float).ravel()
    b = np.asarray(tau_true, dtype=float).ravel()
    if a.shape != b.shape or a.size == 0:
        raise ValueError("tau_hat and tau_true must share a positive length")
    return float(abs(np.mean(a - b)))


@dataclass(frozen=True)
class BenchConfig:
    scenarios: tuple[int, ...] = tuple(SCENARIOS)
    sizes: tuple[tuple[int, int], ...] = ((200, 50),)
    n_reps: int = 20
    variants: tuple[str, ...] = ("scbm", "prop0", "prop1", "cm", "bcm")
    n_test: int = 1000
    n_replicates: int = 10
    m_max: int = 10
    k_max: int = 2
    n_strata_observational: int = 5
    seed: int = 0
    n_jobs: int = 1
    estimator_kwargs: dict = field(default_factory=dict)

    def __post_init__(self):
        for s in self.scenarios:
            if s not in SCENARIOS:
                raise ValueError(f"unknown scenario {s}")
        for v in self.variants:
            if v not in ESTIMATOR_NAMES:
                raise ValueError(f"unknown variant {v!r}")
        if self.n_reps < 1 or self.n_test < 1:
            raise ValueError("n_reps and n_test must be positive")
        if not self.sizes:
            raise ValueError("sizes must list at least one (n, p) setting")
        for n, p in self.sizes:
            if n < 1 or p < 1:
                raise ValueError(f"invalid size ({n}, {p})")


def _cell_seed(cfg: BenchConfig, scenario: int, n: int, p: int, rep: int):
    return np.random.SeedSequence(
        cfg.seed, spawn_key=(scenario, n % _SIZE_INDEX_CAP, p, rep)
    )


def _build(variant: str, cfg: BenchConfig, scenario: int, seed: int):
    kwargs = dict(cfg.estimator_kwargs)
    kwargs.setdefault("m_max", cfg.m_max)
    kwargs.setdefault("k_max", cfg.k_max)
    kwargs["random_state"] = seed
    rct = is_randomized(scenario)
    if variant in ("scbm", "prop0", "prop1"):
        kwargs.setdefault("n_replicates", cfg.n_replicates)
        kwargs.setdefault("propensity", "known:0.5" if rct else "rf")
    elif variant == "bcm":
        kwargs.setdefault("n_replicates", cfg.n_replicates)
        kwargs.setdefault("n_strata", 1 if rct else cfg.n_strata_observational)
        kwargs.setdefault("propensity", "rf")
        if kwargs["n_strata"] == 1:
            kwargs.pop("propensity")
    return make_estimator(variant, **kwargs)


def run_cell(cfg: BenchConfig, scenario: int, n: int, p: int, rep: int) -> list[dict]:
    """All variant rows for one replication of one cell."""
    ss = _cell_seed(cfg, scenario, n, p, rep)
    train_ss, test_ss, fit_ss = ss.spawn(3)
    train = draw_scenario(scenario, n, p, seed=train_ss)
    test = draw_scenario(scenario, cfg.n_test, p, seed=test_ss)
    fit_seeds = fit_ss.spawn(len(cfg.variants))
    rows = []
    for variant, est_ss in zip(cfg.variants, fit_seeds):
        est_seed = int(est_ss.generate_state(1)[0])
        row = {
            "scenario": scenario, "n": n, "p": p, "rep": rep, "variant": variant,
            "seed": est_seed, "mse": float("nan"), "bias": float("nan"),
            "seconds": float("nan"), "error": "",
        }
        t0 = time.perf_counter()
        try:
            est = _build(variant, cfg, scenario, est_seed)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                est.fit(train.X, train.outcome, train.treatment)
                tau_hat = est.predict(test.X)
            row["mse"] = mse(tau_hat, test.tau)
            row["bias"] = abs_bias(tau_hat, test.tau)
        except Exception as exc:  # record and continue; one bad cell
            row["error"] = f"{type(exc).__name__}: {exc}"  # must not kill a run
        # wall time stays in memory only: written reports must be
        # byte-stable for a fixed seed regardless of worker count
        row["seconds"] = time.perf_counter() - t0
        rows.append(row)
    return rows


def _run_cell_star(args):
    return run_cell(*args)


@dataclass(frozen=True)
class BenchResult:
    config: BenchConfig
    rows: list[dict]
    summary: list[dict]


def summarize(rows: list[dict]) -> list[dict]:
    """Per (scenario, n, p, variant): mean/median/quartile MSE over
    replications plus mean absolute bias. Failed replications are counted
    but excluded from the averages."""
    keys = sorted({(r["scenario"], r["n"], r["p"], r["variant"]) for r in rows})
    out = []
    for scenario, n, p, variant in keys:
        sel = [
            r for r in rows
            if (r["scenario"], r["n"], r["p"], r["variant"])
            == (scenario, n, p, variant)
        ]
        ok = [r for r in sel if not r["error"]]
        mse = np.array([r["mse"] for r in ok])
        bias = np.array([r["bias"] for r in ok])
        nan = float("nan")
        out.append({
            "scenario": scenario, "n": n, "p": p, "variant": variant,
            "n_reps": len(sel), "n_failed": len(sel) - len(ok),
            "mean_mse": float(mse.mean()) if ok else nan,
            "se_mse": float(mse.std(ddof=1) / np.sqrt(len(ok)))
            if len(ok) > 1 else nan,
            "median_mse": float(np.median(mse)) if ok else nan,
            "q1_mse": float(np.quantile(mse, 0.25)) if ok else nan,
            "q3_mse": float(np.quantile(mse, 0.75)) if ok else nan,
            "mean_abs_bias": float(bias.mean()) if ok else nan,
            "mean_seconds": float(np.mean([r["seconds"] for r in sel])),
        })
    return out


def run_bench(cfg: BenchConfig, progress=None) -> BenchResult:
    """Run every cell; ``progress`` (if given) is called with each finished
    (scenario, n, p, rep)."""
    tasks = [
        (cfg, scenario, n, p, rep)
        for scenario in cfg.scenarios
        for (n, p) in cfg.sizes
        for rep in range(cfg.n_reps)
    ]
    rows: list[dict] = []
    if cfg.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
            for task, cell_rows in zip(tasks, pool.map(_run_cell_star, tasks)):
                rows.extend(cell_rows)
                if progress:
                    progress(task[1:])
    else:
        for task in tasks:
            rows.extend(run_cell(*task))
            if progress:
                progress(task[1:])
    rows.sort(key=lambda r: (r["scenario"], r["n"], r["p"], r["variant"], r["rep"]))
    return BenchResult(config=cfg, rows=rows, summary=summarize(rows))


_ROW_FIELDS = ("scenario", "n", "p", "rep", "variant", "seed", "mse", "bias",
               "error")
_SUMMARY_FIELDS = ("scenario", "n", "p", "variant", "n_reps", "n_failed",
                   "mean_mse", "se_mse", "median_mse", "q1_mse", "q3_mse",
                   "mean_abs_bias")
_LONG_FIELDS = ("estimator", "scenario", "n", "p", "rep", "metric", "value")


def long_rows(rows: list[dict]) -> list[dict]:
    """Per-replication rows unpivoted to one (metric, value) pair per row,
    ready for plotting grouped by estimator and scenario."""
    out = []
    for r in rows:
        for metric in ("mse", "abs_bias"):
            out.append({
                "estimator": r["variant"], "scenario": r["scenario"],
                "n": r["n"], "p": r["p"], "rep": r["rep"], "metric": metric,
                "value": r["mse"] if metric == "mse" else r["bias"],
            })
    return out


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _write_csv(path, fields, rows) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r[f]) for f in fields])


def write_results(result: BenchResult, out_dir) -> list[str]:
    """Write replication rows, the summary table, and a JSON bundle; returns
    the paths written. Output is byte-stable for a fixed config and seed."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    p_rows = os.path.join(out_dir, "bench_rows.csv")
    _write_csv(p_rows, _ROW_FIELDS, result.rows)
    paths.append(p_rows)
    p_sum = os.path.join(out_dir, "bench_summary.csv")
    _write_csv(p_sum, _SUMMARY_FIELDS, result.summary)
    paths.append(p_sum)
    p_long = os.path.join(out_dir, "bench_long.csv")
    _write_csv(p_long, _LONG_FIELDS, long_rows(result.rows))
    paths.append(p_long)
    p_json = os.path.join(out_dir, "bench.json")
    cfg = result.config
    blob = {
        "config": {
            "scenarios": list(cfg.scenarios),
            "sizes": [list(s) for s in cfg.sizes],
            "n_reps": cfg.n_reps,
            "variants": list(cfg.variants),
            "n_test": cfg.n_test,
            "n_replicates": cfg.n_replicates,
            "m_max": cfg.m_max,
            "k_max": cfg.k_max,
            "n_strata_observational": cfg.n_strata_observational,
            "seed": cfg.seed,
        },
        "rows": [{k: r[k] for k in _ROW_FIELDS} for r in result.rows],
        "summary": [{k: s[k] for k in _SUMMARY_FIELDS} for s in result.summary],
    }
    with open(p_json, "w") as fh:
        json.dump(blob, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(p_json)
    return paths
