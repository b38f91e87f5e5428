"""Command line: ``dpdisc {gen,discretize,synth,eval,attack,experiment}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..attacks import ShadowGameConfig, run_shadow_game, select_target
from ..discretizers import fit_uniform
from ..domain import Domain
from ..estimators import fit_column
from ..exceptions import DPDiscError
from ..generator import PipelineConfig, pipeline_run
from ..mechanisms import BudgetLedger, PrivacyBudget, SeededRng
from ..metrics import (
    aggregate,
    correlation_similarity,
    discriminator_similarity,
    max_percentile_distance,
    predictive_utility,
    query_similarity,
)
from .config import ExperimentConfig
from .data import BENCHMARK_DISTRIBUTIONS, ControlledSpec, Distribution, gen_controlled, load_csv, write_csv
from .runners import best_vs_default, run_experiment

log = logging.getLogger("dpdisc")


def _common(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, default=0, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def _load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8")) if path else {}


def _write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, default=str), encoding="utf-8")
    return path


def cmd_gen(args):
    names = args.dist or list(BENCHMARK_DISTRIBUTIONS)
    root = SeededRng(args.seed)
    for name in names:
        spec = ControlledSpec(name, args.n)
        x = gen_controlled(spec, root.child("data", spec.name, spec.n))
        path = write_csv(Path(args.out) / f"{spec.name}_{spec.n}.csv", {"value": x})
        print(path)


def cmd_discretize(args):
    table = load_csv(args.input)
    cfg = _load_json(args.config)
    opts = {
        "strategy": args.strategy,
        "bins": int(args.bins) if str(args.bins).isdigit() else args.bins,
        "epsilon": args.epsilon,
        "domain": args.domain,
        **cfg,
    }
    rng = SeededRng(args.seed)
    report = {}
    for name in args.columns or table.names:
        if name in table.categorical:
            continue
        x = table.columns[name]
        budget = PrivacyBudget(float(opts["epsilon"]))
        ledger = BudgetLedger(budget)
        bounds = (float(x.min()), float(x.max())) if opts["domain"] == "provided" else None
        fitted = fit_column(
            x,
            strategy=opts["strategy"],
            bins=opts["bins"],
            budget=budget,
            domain_strategy=opts["domain"],
            bounds=bounds,
            rng=rng.child("column", name),
            ledger=ledger,
        )
        report[name] = {**fitted.to_dict(), "ledger": ledger.snapshot()}
    path = _write_json(Path(args.out) / "edges.json", report)
    print(path)


def cmd_synth(args):
    table = load_csv(args.input, label=args.label)
    cfg = PipelineConfig.from_dict(_load_json(args.config)) if args.config else PipelineConfig(domain_strategy="raw")
    if cfg.domain_strategy == "provided" and cfg.bounds is None:
        cfg.bounds = {n: (float(v.min()), float(v.max())) for n, v in table.columns.items()}
    if table.categorical:
        cfg.categorical = tuple(sorted(set(cfg.categorical) | set(table.categorical)))
    n_out = args.n_out or table.n_rows
    result = pipeline_run(table.columns, cfg, n_out, SeededRng(args.seed))
    out = Path(args.out)
    write_csv(out / "synthetic.csv", result.columns, table.encodings)
    _write_json(out / "ledger.json", result.ledger.snapshot())
    print(out / "synthetic.csv")


def cmd_eval(args):
    train = load_csv(args.train, label=args.label)
    synth = load_csv(args.synth, label=args.label)
    names = train.names
    if synth.names != names:
        raise DPDiscError("train and synthetic CSVs must have the same header")
    A, S = train.matrix(names), synth.matrix(names)
    rng = SeededRng(args.seed)
    specs = []
    for j, n in enumerate(names):
        lo, hi = float(min(A[:, j].min(), S[:, j].min())), float(max(A[:, j].max(), S[:, j].max()))
        specs.append(fit_uniform(Domain(lo, hi if hi > lo else lo + 1.0), args.eval_bins))
    parts = {
        "mpd": float(np.mean([max_percentile_distance(A[:, j], S[:, j]) for j in range(len(names))])),
        "ds": discriminator_similarity(A, S, rng=rng.child("ds")),
        "qs": query_similarity(A, S, specs, rng=rng.child("qs")),
    }
    if len(names) >= 2:
        parts["cs"] = correlation_similarity(A, S)
    if args.label and args.test:
        T = load_csv(args.test, label=args.label).matrix(names)
        parts["pu"] = predictive_utility(A, S, T, names.index(args.label))
    report = aggregate(parts).to_dict()
    _write_json(Path(args.out) / "metrics.json", report)
    print(json.dumps(report, indent=1))


def cmd_attack(args):
    if args.input:
        table = load_csv(args.input)
        cfg = ShadowGameConfig(**_load_json(args.config)) if args.config else ShadowGameConfig()
        cfg.seed = args.seed
        X = table.matrix()
        score = run_shadow_game({n: X[:, j] for j, n in enumerate(table.names)}, cfg, select_target(X))
        _write_json(Path(args.out) / "attack.json", score.to_row())
        print(json.dumps(score.to_row()))
        return
    _experiment(args, expect="PS1")


def _experiment(args, expect=None):
    if not args.config:
        raise DPDiscError("--config is required")
    raw = _load_json(args.config)
    raw.setdefault("seed", args.seed)
    if args.seed:
        raw["seed"] = args.seed
    cfg = ExperimentConfig.from_dict(raw)
    if expect and cfg.setting != expect:
        raise DPDiscError(f"config setting is {cfg.setting}, expected {expect}")
    results = run_experiment(cfg, jobs=args.jobs, out_dir=args.out)
    n_err = sum(1 for r, _ in results if r["error"])
    print(f"{len(results)} rows ({n_err} errors) -> {Path(args.out) / 'results.csv'}")
    if cfg.setting in ("US2", "US3lite"):
        rep = best_vs_default(results)
        _write_json(Path(args.out) / "best_vs_default.json", rep)


def cmd_experiment(args):
    _experiment(args)


def build_parser():
    parser = argparse.ArgumentParser(prog="dpdisc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write controlled distributions to CSV")
    _common(p)
    p.add_argument("--dist", action="append", choices=[d.value for d in Distribution])
    p.add_argument("--n", type=int, default=10000)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("discretize", help="fit a discretizer per column and report edges")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--columns", nargs="*")
    p.add_argument("--strategy", default="uniform")
    p.add_argument("--bins", default="20")
    p.add_argument("--epsilon", default="1.0")
    p.add_argument("--domain", default="raw", choices=["provided", "raw", "dp"])
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("synth", help="run the DP histogram pipeline on a CSV")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--label")
    p.add_argument("--n-out", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="utility metrics between two CSVs")
    _common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--synth", required=True)
    p.add_argument("--test")
    p.add_argument("--label")
    p.add_argument("--eval-bins", type=int, default=20)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attack", help="membership inference: one game on a CSV, or a PS1 sweep config")
    _common(p)
    p.add_argument("--input")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("experiment", help="config-driven sweep (US1, US2, US3lite or PS1)")
    _common(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (DPDiscError, ValueError, OSError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
