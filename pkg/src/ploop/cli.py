"""Command-line interface: analyze a dataset, simulate, compare methods.

Exit codes: 0 on success, 1 for dataset/validation problems, 2 for usage
errors. JSON output carries full float precision; tables round to six
significant digits.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .dataset import DEFAULT_ENCODING, ENCODINGS, CsvSchema, load_csv
from .errors import DataError, PloopError, RequestError
from .estimator import (
    DEFAULT_CONFIDENCE,
    DEFAULT_METHOD,
    METHODS,
    EstimateResult,
    estimate_all,
)
from .imputation import ImputationResult
from .predictors import BACKENDS, DEFAULT_BACKEND
from .simulation import DgpConfig, monte_carlo


def _alpha_summary(imp: ImputationResult | None):
    if imp is None or imp.alpha_a is None:
        return None
    weights = np.concatenate([imp.alpha_a, imp.alpha_b])
    return {"min": float(weights.min()), "max": float(weights.max()), "mean": float(weights.mean())}


def _result_payload(res: EstimateResult, imp: ImputationResult | None) -> dict:
    payload = {
        "method": res.method,
        "backend": res.backend,
        "encoding": res.encoding,
        "point_estimate": res.tau_hat,
        "variance": res.variance,
        "std_error": res.std_error,
        "ci_lower": res.ci_lower,
        "ci_upper": res.ci_upper,
        "n_pairs": res.n_pairs,
        "n_treated": res.n_treated,
        "warnings": list(res.warnings),
    }
    alpha = _alpha_summary(imp)
    if alpha is not None:
        payload["alpha"] = alpha
    return payload


def _format_result_table(res: EstimateResult, imp: ImputationResult | None) -> str:
    rows = [
        ("method", res.method),
        ("backend", res.backend if res.backend is not None else "-"),
        ("encoding", res.encoding if res.encoding is not None else "-"),
        ("point estimate", f"{res.tau_hat:.6g}"),
        ("variance", f"{res.variance:.6g}"),
        ("std error", f"{res.std_error:.6g}"),
        ("ci lower", f"{res.ci_lower:.6g}"),
        ("ci upper", f"{res.ci_upper:.6g}"),
        ("n pairs", str(res.n_pairs)),
        ("n treated", str(res.n_treated)),
    ]
    alpha = _alpha_summary(imp)
    if alpha is not None:
        rows.append(("alpha (min/mean/max)", f"{alpha['min']:.6g} / {alpha['mean']:.6g} / {alpha['max']:.6g}"))
    for w in res.warnings:
        rows.append(("warning", w))
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def _load_dataset(args) -> "PairedDataset":
    covariates = None
    if args.covariates:
        covariates = tuple(c.strip() for c in args.covariates.split(",") if c.strip())
    schema = CsvSchema(pair=args.pair, treatment=args.treat, outcome=args.outcome, covariates=covariates)
    return load_csv(args.input, schema, allow_no_covariates=args.no_covariates)


def _cmd_analyze(args) -> int:
    ds = _load_dataset(args)
    results = estimate_all(
        ds, [args.method], backend=args.backend, encoding=args.encoding,
        seed=args.seed, confidence=args.confidence,
    )
    res, imp = results[args.method]
    if args.format == "json":
        print(json.dumps(_result_payload(res, imp)))
    else:
        print(_format_result_table(res, imp))
    return 0


def _cmd_compare(args) -> int:
    ds = _load_dataset(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise RequestError("compare needs at least one method")
    results = estimate_all(
        ds, methods, backend=args.backend, encoding=args.encoding,
        seed=args.seed, confidence=args.confidence,
    )
    if args.format == "json":
        print(json.dumps([_result_payload(*results[m]) for m in methods]))
    else:
        header = f"{'Method':<20}{'Point Est.':>14}{'Nominal Var.':>14}"
        lines = [f"n_pairs: {ds.n_pairs}", header, "-" * len(header)]
        for m in methods:
            res, _ = results[m]
            lines.append(f"{res.method:<20}{res.tau_hat:>14.6g}{res.variance:>14.6g}")
        print("\n".join(lines))
    return 0


def _thread_count() -> int:
    raw = os.environ.get("PLOOP_THREADS")
    if raw is None:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        raise RequestError(f"PLOOP_THREADS must be an integer, got {raw!r}") from None
    if jobs < 1:
        raise RequestError("PLOOP_THREADS must be at least 1")
    return jobs


def _cmd_simulate(args) -> int:
    if args.reps < 2:
        raise RequestError("replicates must be at least 2")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    cfg = DgpConfig(
        kind=args.dgp, n_pairs=args.pairs, p1=args.p1, p0=args.p0,
        noise_sd=args.noise_sd, seed=args.seed,
    )
    summary = monte_carlo(
        cfg, methods, replicates=args.reps, backend=args.backend,
        encoding=args.encoding, seed=args.seed, confidence=args.confidence,
        n_jobs=_thread_count(),
    )
    if args.format == "json":
        print(summary.to_json())
    else:
        print(summary.format_table())
    return 0


def _add_dataset_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", required=True, help="CSV file with one row per unit")
    parser.add_argument("--pair", required=True, help="pair-id column name")
    parser.add_argument("--treat", required=True, help="treatment column name (0/1)")
    parser.add_argument("--outcome", required=True, help="outcome column name")
    parser.add_argument(
        "--covariates",
        help="comma-separated covariate columns (default: every remaining column)",
    )
    parser.add_argument(
        "--no-covariates", action="store_true",
        help="allow a covariate-free analysis",
    )
    parser.add_argument("--backend", choices=BACKENDS, default=DEFAULT_BACKEND)
    parser.add_argument("--encoding", choices=ENCODINGS, default=DEFAULT_ENCODING)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--confidence", type=float, default=DEFAULT_CONFIDENCE)
    parser.add_argument("--format", choices=("json", "table"), default="json")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ploop",
        description="Covariate-adjusted treatment effect estimation for paired experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="estimate a treatment effect from a CSV")
    _add_dataset_arguments(analyze)
    analyze.add_argument("--method", choices=METHODS, default=DEFAULT_METHOD)
    analyze.set_defaults(run=_cmd_analyze)

    compare = sub.add_parser("compare", help="estimate several methods on one dataset")
    _add_dataset_arguments(compare)
    compare.add_argument(
        "--methods", default=",".join(METHODS),
        help="comma-separated method list (default: all)",
    )
    compare.set_defaults(run=_cmd_compare)

    simulate = sub.add_parser("simulate", help="run the Monte Carlo harness")
    simulate.add_argument("--dgp", choices=("simpsons", "uninformative"), required=True)
    simulate.add_argument("--pairs", type=int, default=50)
    simulate.add_argument("--reps", type=int, required=True)
    simulate.add_argument("--methods", default="simple")
    simulate.add_argument("--backend", choices=BACKENDS, default=DEFAULT_BACKEND)
    simulate.add_argument("--encoding", choices=ENCODINGS, default=DEFAULT_ENCODING)
    simulate.add_argument("--p1", type=float, default=0.9)
    simulate.add_argument("--p0", type=float, default=0.5)
    simulate.add_argument("--noise-sd", type=float, default=2.0)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--confidence", type=float, default=DEFAULT_CONFIDENCE)
    simulate.add_argument("--format", choices=("json", "table"), default="json")
    simulate.set_defaults(run=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.run(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RequestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
