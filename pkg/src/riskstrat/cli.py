"""Command line interface.

Exit codes: 0 success, 1 usage, 2 bad data, 3 fitting failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .evaluation import cross_validate, cross_validate_scores
from .fileio import DataError, ModelFile, ingest_csv, load_schema, read_table, region_table, table_to_dataset, tree_to_dot, write_csv
from .pipeline import RiskStratifyConfig, fit, fit_partition_only
from .stats import TestMethod
from .synthetic import XorConfig, generate_null, generate_xor

EXIT_USAGE, EXIT_DATA, EXIT_FIT = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_fit_options(p):
    p.add_argument("--t-star", type=float, default=5.0, help="time at which risks are reported and the U-test compares (default 5)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--alpha-prime", type=float, default=None, help="split/merge level (default alpha/d)")
    p.add_argument("--n-leaf", type=int, default=2, help="minimum number of final regions (default 2)")
    p.add_argument("--min-node", type=int, default=None, help="minimum records per tree leaf (default max(25, 0.5%% of N))")
    p.add_argument("--method", choices=("logrank", "utest"), default="utest", help="utest needs full follow-up to --t-star; use logrank for censored data")
    p.add_argument("--delta", type=float, default=None, help="optional minimum empirical distance between split children")
    p.add_argument("--horizon", type=float, default=None, help="truncation time for the integrated distance")
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--schema", help="JSON schema declaring covariates and level order")
    p.add_argument("--continuous", default="", help="comma-separated covariates to cut into tertiles")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="riskstrat", description="Risk stratification of survival data by test-driven trees and leaf merging.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a model to a CSV")
    p.add_argument("data")
    p.add_argument("--model", default="model.json")
    p.add_argument("--dot", default="tree.dot")
    _add_fit_options(p)

    p = sub.add_parser("predict", help="assign rows of a CSV to model regions")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("-o", "--output", help="write CSV here instead of stdout")

    p = sub.add_parser("evaluate", help="cross-validated out-of-sample FDR")
    p.add_argument("data")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scores", help="CSV of external risk scores (columns row,score) to evaluate instead of fitting")
    p.add_argument("--k", type=int, help="number of score buckets with --scores")
    _add_fit_options(p)

    p = sub.add_parser("simulate", help="write a synthetic cohort")
    p.add_argument("kind", choices=("xor", "null"))
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--d", type=int, default=4, help="covariates (null only)")
    p.add_argument("--rho", type=float, default=0.3, help="x1/x2 correlation (xor only)")
    p.add_argument("--p-x1", type=float, default=0.2, help="P(x1=1) (xor only)")
    p.add_argument("--censor-rate", type=float, default=0.0, help="exponential censoring rate (xor only)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    return parser


def _config(args) -> RiskStratifyConfig:
    if args.method == "utest":
        method = TestMethod.utest(args.t_star)
    else:
        method = TestMethod.logrank()
    if args.n_leaf < 1 or (args.min_node is not None and args.min_node < 1) or args.threads < 1:
        raise UsageError("--n-leaf, --min-node and --threads must be positive")
    try:
        config = RiskStratifyConfig(
            alpha=args.alpha,
            alpha_prime=args.alpha_prime,
            method=method,
            n_leaf=args.n_leaf,
            min_node=args.min_node,
            delta=args.delta,
            max_depth=args.max_depth,
            horizon=args.horizon,
            t_star=args.t_star,
            threads=args.threads,
        )
        config.grow_config()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return config


def _load(args):
    schema = load_schema(args.schema) if args.schema else None
    continuous = [c for c in args.continuous.split(",") if c]
    return ingest_csv(args.data, schema, continuous)


def _warn_censoring(data, config: RiskStratifyConfig) -> None:
    t = config.method.t_star
    if t is not None and bool(((~data.event) & (data.time < t)).any()):
        print(f"warning: some records are censored before t*={t:g}; the U-test assumes full follow-up (consider --method logrank)", file=sys.stderr)


def cmd_fit(args) -> int:
    data, cuts = _load(args)
    config = _config(args)
    _warn_censoring(data, config)
    try:
        model = fit(data, config)
    except (ValueError, ArithmeticError) as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    mf = ModelFile.from_model(model, cuts)
    mf.save(args.model)
    Path(args.dot).write_text(tree_to_dot(mf))
    print(f"{len(model.tree.leaves)} tree leaves merged into {len(model.partition)} regions")
    print(region_table(mf))
    return 0


def cmd_predict(args) -> int:
    model = ModelFile.load(args.model)
    cont = list(model.cutpoints)
    table = read_table(args.data, model.schema.names, cont, model.cutpoints, require_outcome=False)
    rows = []
    if table.n_rows:
        data = table_to_dataset(table, model.schema)
        rows = model.predict(data.X)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["row", "region", "risk", "survival"])
        for i, (region, risk, surv) in enumerate(rows, start=1):
            w.writerow([i, region, "" if risk is None else repr(risk), "" if surv is None else repr(surv)])
    finally:
        if args.output:
            out.close()
    return 0


def _read_scores(path, n: int) -> list[float]:
    scores = [None] * n
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"row", "score"} <= set(reader.fieldnames):
            raise DataError("scores file needs columns 'row' and 'score'")
        for line, rec in enumerate(reader, start=1):
            try:
                row, score = int(rec["row"]), float(rec["score"])
            except (TypeError, ValueError):
                raise DataError(f"row {line}: unparseable score entry") from None
            if not 1 <= row <= n:
                raise DataError(f"row {line}: data row {row} out of range")
            scores[row - 1] = score
    missing = [i + 1 for i, s in enumerate(scores) if s is None]
    if missing:
        raise DataError(f"no score for data row {missing[0]}")
    return scores


def cmd_evaluate(args) -> int:
    data, _ = _load(args)
    config = _config(args)
    _warn_censoring(data, config)
    if args.runs < 1:
        raise UsageError("--runs must be at least 1")
    if args.scores:
        if not args.k:
            raise UsageError("--scores needs --k")
        scores = _read_scores(args.scores, len(data))
        summary = cross_validate_scores(data, scores, args.k, config.alpha, config.method, args.runs, args.seed)
        label = f"quantile buckets (k={args.k})"
    else:
        summary = cross_validate(data, fit_partition_only(config), config.alpha, config.method, args.runs, args.seed, args.threads)
        label = "risk-stratify"
    if summary.runs == 0:
        print("all runs failed: " + "; ".join(summary.errors), file=sys.stderr)
        return EXIT_FIT
    ci = f"{100 * summary.ci95_halfwidth:.1f}" if summary.ci_defined else "undefined (runs=1)"
    print(f"method: {label}, test: {config.method}")
    print(f"runs: {summary.runs} ({summary.failures} failed)")
    print(f"FDR %: {100 * summary.mean_fdr:.1f} +/- {ci}")
    print(f"mean # of groups: {summary.mean_region_count:.1f}")
    print(json.dumps({"method": label, **summary.as_row()}))
    return 0


def cmd_simulate(args) -> int:
    try:
        if args.kind == "xor":
            data = generate_xor(XorConfig(args.n, args.rho, args.censor_rate, args.seed, args.p_x1))
        else:
            data = generate_null(args.n, args.d, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_csv(data, args.output)
    return 0


COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "evaluate": cmd_evaluate, "simulate": cmd_simulate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"riskstrat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"riskstrat: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"riskstrat: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
