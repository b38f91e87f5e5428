"""Sweep runners for the utility (US1, US2, US3-lite) and privacy (PS1) settings.

Every sweep point derives its random stream from ``(master seed, point)``,
so results do not depend on execution order or on the number of workers.
A failing repeat becomes an error row instead of disappearing.
"""
from __future__ import annotations

import csv
import functools
import json
import math
import time
import traceback
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..attacks import ShadowGameConfig, run_shadow_game, select_target, target_at
from ..discretizers import categorical_spec, fit_uniform
from ..domain import Domain
from ..estimators import fit_column
from ..exceptions import DPDiscError
from ..generator import PipelineConfig, fit_histogram_dp, fit_product_model, sample_histogram
from ..mechanisms import BudgetLedger, PrivacyBudget, SeededRng, _hash64
from ..metrics import (
    aggregate,
    correlation_similarity,
    discriminator_similarity,
    max_percentile_distance,
    predictive_utility,
    query_similarity,
    record_similarity,
)
from .config import ExperimentConfig, Setting
from .data import TARGET, ControlledSpec, Table, gen_controlled, load_csv, wine_like

RESULT_COLUMNS = (
    "setting",
    "dataset",
    "n",
    "discretizer",
    "bins",
    "b_actual",
    "epsilon",
    "domain_strategy",
    "sampling",
    "extractor",
    "model",
    "synth_set",
    "seed",
    "rs",
    "mpd",
    "ds",
    "qs",
    "cs",
    "pu",
    "aggregate",
    "auc",
    "error",
)
OUT_OF_SCOPE_NOTE = "five-model comparison: not run - out of scope (product histogram model only)"


def _eps(e):
    return "inf" if math.isinf(e) else e


def point_seed(master: int, point: dict) -> int:
    return _hash64(master, json.dumps(point, sort_keys=True, default=str))


def sweep_points(cfg: ExperimentConfig) -> list:
    """The cartesian sweep, in a fixed order."""
    ds = cfg.dataset
    if ds.kind == "controlled":
        datasets = [(d, int(n)) for d in ds.distributions for n in ds.sizes]
    elif ds.kind == "wine_like":
        datasets = [("wine_like", int(ds.n))]
    else:
        datasets = [(Path(ds.path).name, None)]
    points = []
    for name, n in datasets:
        for dom in cfg.domain_strategies:
            for disc in cfg.discretizers:
                for b in cfg.bins:
                    for e in cfg.epsilons:
                        base = {
                            "setting": cfg.setting,
                            "dataset": name,
                            "n": n,
                            "discretizer": disc,
                            "bins": b,
                            "epsilon": _eps(e),
                            "domain_strategy": dom,
                            "sampling": cfg.sampling,
                        }
                        if cfg.setting == Setting.PS1.value:
                            points.extend({**base, "extractor": x} for x in cfg.extractors)
                        else:
                            points.append({**base, "extractor": ""})
    return points


def n_repeats(cfg: ExperimentConfig) -> int:
    """Rows per sweep point: models x synthetic sets (one game per model for PS1)."""
    return cfg.models if cfg.setting == Setting.PS1.value else cfg.models * cfg.synth_sets


# ---------------------------------------------------------------------------
# data


@functools.lru_cache(maxsize=16)
def _load(kind, name, n, path, label, plant, seed) -> Table:
    rng = SeededRng(seed).child("data", kind, name, n)
    if kind == "controlled":
        x = gen_controlled(ControlledSpec(name, n), rng)
        return Table({"value": x})
    if kind == "wine_like":
        return Table(wine_like(n, rng, label=label is not None, plant_target=plant), ["label"] if label else [], {}, label)
    return load_csv(path, label)


def load_point_data(cfg: ExperimentConfig, point: dict) -> Table:
    ds = cfg.dataset
    label = ds.label if ds.kind != "wine_like" else ("label" if cfg.setting != Setting.PS1.value else None)
    return _load(ds.kind, point["dataset"], point["n"], ds.path, label, ds.plant_target, cfg.seed)


def _bounds(table: Table, kind: str) -> dict:
    """Public bounds: [-10, 10] for controlled data, else the observed range."""
    if kind == "controlled":
        return {n: TARGET for n in table.columns}
    out = {}
    for n, v in table.columns.items():
        lo, hi = float(v.min()), float(v.max())
        out[n] = (lo, hi) if hi > lo else (lo - 0.5, hi + 0.5)
    return out


# ---------------------------------------------------------------------------
# per-point work


class _Timer:
    def __init__(self):
        self.stages = {}

    def __call__(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.stages[name] = timer.stages.get(name, 0.0) + time.perf_counter() - self.t0

        return _Ctx()


def _base_row(point, seed, model, synth_set):
    row = {k: "" for k in RESULT_COLUMNS}
    row.update({k: point[k] for k in point if k in row})
    row.update({"model": model, "synth_set": synth_set, "seed": seed, "n": point["n"] if point["n"] else ""})
    return row


def _error_rows(point, seed, model, n_sets, exc):
    rows = []
    for s in range(n_sets):
        row = _base_row(point, seed, model, s)
        row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append((row, {"timings": {}, "traceback": traceback.format_exception_only(type(exc), exc)}))
    return rows


def _metric_fields(report):
    d = report.to_dict()
    return {k: d.get(k, "") for k in ("rs", "mpd", "ds", "qs", "cs", "pu", "aggregate")}


def _run_single_column(cfg, point, table, seed, model_idx):
    """US1 / US2: one discretizer fit, ``synth_sets`` decodes."""
    x = table.columns["value"]
    eps = float(point["epsilon"])
    rng = SeededRng(seed).child("model", model_idx)
    bounds = _bounds(table, cfg.dataset.kind)["value"]
    us2 = point["setting"] == Setting.US2.value
    timer = _Timer()
    ledger = BudgetLedger(PrivacyBudget(eps))
    t0 = time.perf_counter()
    if us2:
        disc_b, model_b = ledger.split(
            [("discretization", cfg.discretization_share), ("modeling", 1.0 - cfg.discretization_share)]
        )
        disc_ledger = ledger.subledger("discretization", disc_b)
    else:
        disc_b = ledger.spend("discretization", 1.0)
        disc_ledger = ledger.subledger("discretization", disc_b)
    with timer("discretize"):
        fitted = fit_column(
            x,
            strategy=point["discretizer"],
            bins=point["bins"],
            budget=disc_b,
            domain_strategy=point["domain_strategy"],
            bounds=bounds,
            sampling=point["sampling"],
            rice_epsilon=eps,
            rng=rng.child("discretize"),
            ledger=disc_ledger,
        )
        binned = fitted.encode(x)
    hist = None
    if us2:
        with timer("model"):
            hist = fit_histogram_dp(binned, model_b, rng.child("histogram"))
    fit_wall = time.perf_counter() - t0

    eval_spec = fit_uniform(Domain(*bounds), cfg.eval_bins)
    out = []
    for s in range(cfg.synth_sets):
        t1 = time.perf_counter()
        stimer = _Timer()
        srng = rng.child("synth", s)
        with stimer("sample"):
            b_in = sample_histogram(hist, x.size, srng.child("bins")) if us2 else binned
            synth = fitted.decode(b_in, srng.child("decode").generator)
        with stimer("metrics"):
            parts = {
                "mpd": max_percentile_distance(x, synth),
                "ds": discriminator_similarity(x, synth, rng=srng.child("ds")),
                "qs": query_similarity(x, synth, [eval_spec], dims=(1,), rng=srng.child("qs")),
            }
            if not us2:
                parts["rs"] = record_similarity(x, synth, [bounds])
            report = aggregate(parts)
        row = _base_row(point, seed, model_idx, s)
        row.update(_metric_fields(report))
        row["b_actual"] = fitted.spec.n_bins
        timings = {**timer.stages, **stimer.stages}
        timings["total"] = fit_wall + (time.perf_counter() - t1)
        out.append((row, {"timings": timings, "ledger": ledger.snapshot(), "column": fitted.to_dict()}))
    return out


def _split(table: Table, frac, rng):
    n = table.n_rows
    perm = rng.generator.permutation(n)
    n_test = max(1, int(round(frac * n)))
    te, tr = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    return {k: v[tr] for k, v in table.columns.items()}, {k: v[te] for k, v in table.columns.items()}


def _run_multi_column(cfg, point, table, seed, model_idx):
    """US3-lite: product model over all columns."""
    eps = float(point["epsilon"])
    rng = SeededRng(seed).child("model", model_idx)
    train, test = _split(table, cfg.test_fraction, SeededRng(cfg.seed).child("split", point["dataset"]))
    names = list(train)
    bounds = _bounds(table, cfg.dataset.kind)
    categorical = tuple(table.categorical)
    pipe = PipelineConfig(
        domain_strategy=point["domain_strategy"],
        discretizer=point["discretizer"],
        bins=point["bins"],
        sampling=point["sampling"],
        epsilon=eps,
        discretization_share=cfg.discretization_share,
        bounds=bounds,
        categorical=categorical,
    )
    timer = _Timer()
    t0 = time.perf_counter()
    ledger = BudgetLedger(pipe.budget)
    disc_b, model_b = ledger.split(
        [("discretization", pipe.discretization_share), ("modeling", 1.0 - pipe.discretization_share)]
    )
    with timer("fit"):
        model = fit_product_model(
            train,
            pipe,
            disc_b,
            model_b,
            rng.child("fit"),
            ledger.subledger("discretization", disc_b),
            ledger.subledger("modeling", model_b),
        )
    fit_wall = time.perf_counter() - t0

    numeric = [n for n in names if n not in categorical]
    eval_specs = [
        categorical_spec(int(table.columns[n].max()) + 1) if n in categorical else fit_uniform(Domain(*bounds[n]), cfg.eval_bins)
        for n in names
    ]
    A = np.column_stack([train[n] for n in names])
    T = np.column_stack([test[n] for n in names])
    n_train = A.shape[0]
    b_actual = [int(s.n_bins) for n, s in model.specs.items() if n not in categorical]
    out = []
    for s in range(cfg.synth_sets):
        t1 = time.perf_counter()
        stimer = _Timer()
        srng = rng.child("synth", s)
        with stimer("sample"):
            synth = model.sample(n_train, srng.child("generate"))
            S = np.column_stack([synth[n] for n in names])
        with stimer("metrics"):
            idx = [names.index(n) for n in numeric]
            parts = {
                "mpd": float(np.mean([max_percentile_distance(A[:, j], S[:, j]) for j in idx])),
                "ds": discriminator_similarity(A, S, T, rng=srng.child("ds")),
                "qs": query_similarity(A, S, eval_specs, dims=(1, 2, 3), rng=srng.child("qs")),
            }
            if len(names) >= 2:
                parts["cs"] = correlation_similarity(A, S)
            if table.label is not None:
                parts["pu"] = predictive_utility(A, S, T, names.index(table.label), rng=srng.child("pu"))
            report = aggregate(parts)
        row = _base_row(point, seed, model_idx, s)
        row.update(_metric_fields(report))
        row["b_actual"] = float(np.mean(b_actual)) if b_actual else ""
        timings = {**timer.stages, **stimer.stages}
        timings["total"] = fit_wall + (time.perf_counter() - t1)
        out.append(
            (row, {"timings": timings, "ledger": ledger.snapshot(), "b_per_column": b_actual, "note": OUT_OF_SCOPE_NOTE})
        )
    return out


def _run_attack(cfg, point, table, seed, model_idx):
    names = table.names
    X = table.matrix(names)
    # a planted record is the target by construction; otherwise the attacker picks the most isolated one
    target = target_at(X, -1) if cfg.dataset.plant_target else select_target(X)
    bounds = _bounds(table, cfg.dataset.kind)
    game = ShadowGameConfig(
        n_models_per_class=cfg.n_models_per_class,
        discretizer=point["discretizer"],
        domain_strategy=point["domain_strategy"],
        epsilon_g=cfg.epsilon_g,
        epsilon_d=float(point["epsilon"]),
        extractor=point["extractor"],
        seed=_hash64(seed, "game", model_idx),
        bins=point["bins"],
        sampling=point["sampling"],
        bounds=bounds,
        n_synth=cfg.n_synth,
    )
    t0 = time.perf_counter()
    score = run_shadow_game({n: X[:, j] for j, n in enumerate(names)}, game, target)
    row = _base_row(point, seed, model_idx, 0)
    row["auc"] = score.auc
    extra = {
        "timings": {"game": time.perf_counter() - t0, "total": time.perf_counter() - t0},
        "attack": score.to_row(),
        "fingerprint": score.fingerprint,
        "target": {"index": target.index, "outside_domain": target.outside_domain},
        "epsilon_g": _eps(cfg.epsilon_g),
    }
    return [(row, extra)]


_RUNNERS = {
    Setting.US1.value: _run_single_column,
    Setting.US2.value: _run_single_column,
    Setting.US3LITE.value: _run_multi_column,
    Setting.PS1.value: _run_attack,
}


def run_point(cfg: ExperimentConfig, point: dict) -> list:
    """All repeats of one sweep point as ``(csv_row, json_extra)`` pairs."""
    seed = point_seed(cfg.seed, point)
    fn = _RUNNERS[point["setting"]]
    n_sets = 1 if point["setting"] == Setting.PS1.value else cfg.synth_sets
    rows = []
    for m in range(cfg.models):
        try:
            table = load_point_data(cfg, point)
            if point["setting"] in (Setting.US1.value, Setting.US2.value) and table.names != ["value"]:
                raise DPDiscError("US1/US2 need a single-column dataset")
            rows.extend(fn(cfg, point, table, seed, m))
        except Exception as exc:  # recorded as an error row, never dropped
            rows.extend(_error_rows(point, seed, m, n_sets, exc))
    return rows


def _run_point_dict(args):
    cfg_dict, point = args
    return run_point(ExperimentConfig.from_dict(cfg_dict), point)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, out_dir=None) -> list:
    """Run the whole sweep; write ``results.csv`` and ``results.json`` when ``out_dir`` is given."""
    points = sweep_points(cfg)
    if jobs and jobs > 1:
        payload = [(cfg.to_dict(), p) for p in points]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(_run_point_dict, payload))
    else:
        chunks = [run_point(cfg, p) for p in points]
    results = [r for chunk in chunks for r in chunk]
    if out_dir is not None:
        write_results(results, cfg, out_dir)
    return results


def run_us1(cfg, **kw):
    return run_experiment(_check_setting(cfg, Setting.US1), **kw)


def run_us2(cfg, **kw):
    return run_experiment(_check_setting(cfg, Setting.US2), **kw)


def run_us3lite(cfg, **kw):
    return run_experiment(_check_setting(cfg, Setting.US3LITE), **kw)


def run_ps1(cfg, **kw):
    return run_experiment(_check_setting(cfg, Setting.PS1), **kw)


def _check_setting(cfg, setting):
    if cfg.setting != setting.value:
        raise ValueError(f"config is for {cfg.setting}, not {setting.value}")
    return cfg


def replay(cfg: ExperimentConfig, row: dict) -> dict:
    """Recompute a single result row from its own coordinates."""
    point = {k: row[k] for k in ("setting", "dataset", "discretizer", "bins", "epsilon", "domain_strategy", "sampling", "extractor")}
    point["n"] = row["n"] if row["n"] != "" else None
    for r, _ in run_point(cfg, point):
        if r["model"] == row["model"] and r["synth_set"] == row["synth_set"]:
            return r
    raise KeyError("row not produced by its own coordinates")


# ---------------------------------------------------------------------------
# persistence and reporting


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def write_results(results, cfg: ExperimentConfig, out_dir) -> tuple:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for row, _ in results:
            w.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])
    json_path = out / "results.json"
    blob = {"config": cfg.to_dict(), "records": [{**row, **extra} for row, extra in results]}
    json_path.write_text(json.dumps(blob, indent=1, default=_json_default), encoding="utf-8")
    return csv_path, json_path


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def mean_scores(rows, keys=("dataset", "n", "epsilon", "domain_strategy", "discretizer", "bins"), value="aggregate"):
    """Average ``value`` over repeats, grouped by ``keys``; error rows are skipped."""
    acc = defaultdict(list)
    for row in rows:
        row = row[0] if isinstance(row, tuple) else row
        if row.get("error") or row.get(value, "") == "":
            continue
        acc[tuple(row[k] for k in keys)].append(float(row[value]))
    return {k: float(np.mean(v)) for k, v in acc.items()}


def best_vs_default(rows, default=("uniform", 20)) -> dict:
    """Per cell (dataset, n, epsilon, domain), the best (discretizer, bins) against the default pair."""
    means = mean_scores(rows)
    cells = defaultdict(dict)
    for (ds, n, eps, dom, disc, b), v in means.items():
        cells[(ds, n, eps, dom)][(disc, b)] = v
    report = []
    for cell, scores in cells.items():
        best = max(scores, key=lambda k: (scores[k], k == default))
        report.append(
            {
                "cell": cell,
                "best": best,
                "best_score": scores[best],
                "default_score": scores.get(default),
                "privtree_best": best[0] == "privtree",
            }
        )
    n_cells = len(report)
    return {
        "cells": report,
        "never_worse": all(r["default_score"] is None or r["best_score"] >= r["default_score"] for r in report),
        "privtree_fraction": sum(r["privtree_best"] for r in report) / n_cells if n_cells else float("nan"),
        "mean_improvement": float(
            np.mean([r["best_score"] - r["default_score"] for r in report if r["default_score"] is not None])
        )
        if n_cells
        else float("nan"),
    }
