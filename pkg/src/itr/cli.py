"""Command-line entry point.

Every run writes its artifacts plus a ``manifest.json`` echoing the fully
resolved configuration, the software version and the wall time, so a run
can be reproduced from its manifest alone.  Exit codes: 0 success,
2 validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .basis import BasisSpec, binary_coding, build_design, load_coding_json
from .bounds import audit_theorem_bound
from .data import load_dataset_csv, save_dataset_csv
from .errors import InputError, ItrError
from .plots import benchmark_figure
from .policy import derive_rule, load_rule_json, save_rule_json
from .simulation import (
    BenchmarkScenario,
    model_by_name,
    run_benchmark,
    write_results_csv,
    write_summary_csv,
)
from .solver import FitConfig, fit_ols, fit_weighted_lasso
from .tuning import select_lambda

log = logging.getLogger("itr")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _prepare_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out: Path, command: str, config: dict, started: float) -> None:
    _write_json(out / "manifest.json", {
        "command": command,
        "config": config,
        "version": __version__,
        "wall_time_s": round(time.monotonic() - started, 3),
    })


def _basis_spec(args) -> BasisSpec:
    kind = "haar-wavelet" if args.basis == "haar" else "linear-interaction"
    return BasisSpec(kind=kind,
                     penalize_main_treatment=not getattr(args, "unpenalized_main", False))


def _coding(args):
    if getattr(args, "coding", None):
        return load_coding_json(args.coding)
    return binary_coding()


def cmd_simulate(args) -> int:
    out = _prepare_out(args)
    started = time.monotonic()
    model = model_by_name(args.example if args.example.startswith(("example", "toy"))
                          else f"example{args.example}")
    dataset = model.sample(args.n, args.seed)
    save_dataset_csv(dataset, out / "data.csv", include_prob=args.with_prob)
    _manifest(out, "simulate", {"example": args.example, "n": args.n,
                                "seed": args.seed, "with_prob": args.with_prob,
                                "out": str(out)}, started)
    return 0


def cmd_fit(args) -> int:
    out = _prepare_out(args)
    started = time.monotonic()
    dataset = load_dataset_csv(args.data)
    coding = _coding(args)
    spec = _basis_spec(args)
    design = build_design(dataset, coding, spec)
    if args.method == "ols":
        fit = fit_ols(design, dataset.r)
    else:
        fit = fit_weighted_lasso(design, dataset.r, args.lam, FitConfig())
    _write_json(out / "coefficients.json", fit.to_dict(design))
    save_rule_json(derive_rule(fit, design, coding), out / "rule.json")
    _manifest(out, "fit", {"data": str(args.data), "basis": args.basis,
                           "method": args.method, "lambda": args.lam,
                           "coding": args.coding, "out": str(out)}, started)
    return 0


def cmd_tune(args) -> int:
    out = _prepare_out(args)
    started = time.monotonic()
    dataset = load_dataset_csv(args.data)
    coding = _coding(args)
    spec = _basis_spec(args)
    report = select_lambda(dataset, coding, spec, folds=args.folds,
                           seed=args.seed)
    _write_json(out / "tuning_report.json", report.to_dict())
    _write_json(out / "coefficients.json", report.fit.to_dict())
    save_rule_json(report.rule, out / "rule.json")
    _manifest(out, "tune", {"data": str(args.data), "basis": args.basis,
                            "coding": args.coding, "folds": args.folds,
                            "seed": args.seed, "out": str(out)}, started)
    return 0


def cmd_apply(args) -> int:
    out = _prepare_out(args)
    started = time.monotonic()
    rule = load_rule_json(args.rule)
    dataset = load_dataset_csv(args.data)
    arms = rule.evaluate(dataset.x)
    with (out / "recommendations.csv").open("w", newline="") as fh:
        fh.write("row,arm\n")
        for i, a in enumerate(arms):
            fh.write(f"{i},{a}\n")
    _manifest(out, "apply", {"rule": str(args.rule), "data": str(args.data),
                             "out": str(out)}, started)
    return 0


def cmd_benchmark(args) -> int:
    out = _prepare_out(args)
    started = time.monotonic()
    scenario = BenchmarkScenario(
        example_id=args.example,
        sample_sizes=tuple(int(s) for s in args.sizes.split(",")),
        replications=args.reps,
        methods=tuple(args.methods.split(",")),
        test_size=args.test_size,
        base_seed=args.seed,
        n_jobs=args.jobs,
    )
    result = run_benchmark(scenario)
    write_results_csv(result, out / "results.csv")
    summary = result.summary()
    write_summary_csv(result, out / "summary.csv")
    benchmark_figure(summary, out / "benchmark.png")
    _manifest(out, "benchmark", {
        "example": args.example, "sizes": args.sizes, "reps": args.reps,
        "methods": args.methods, "test_size": args.test_size,
        "seed": args.seed, "jobs": args.jobs, "out": str(out)}, started)
    return 0


def _linear_fit_candidate(model, seed: int):
    """A linear-interaction least-squares approximation of Q0 fitted on a
    large simulated sample; the default audit candidate."""
    dataset = model.sample(100_000, seed)
    design = build_design(dataset, model.coding, BasisSpec())
    fit = fit_ols(design, dataset.r)
    basis = design.feature_basis

    theta_main = np.zeros(len(basis.names))
    theta_trt = np.zeros((len(basis.names), model.coding.n_contrasts))
    for j, col in enumerate(design.columns):
        if col.group == "main":
            theta_main[col.feature_index] = fit.theta[j]
        else:
            theta_trt[col.feature_index, col.contrast_index] = fit.theta[j]

    def q(x, arm):
        feats = basis.evaluate(np.atleast_2d(np.asarray(x, dtype=float)))
        contrast = model.coding.contrasts[model.coding.index_of(arm)]
        return feats @ theta_main + (feats @ theta_trt) @ contrast

    return q


def cmd_audit(args) -> int:
    out = _prepare_out(args)
    started = time.monotonic()
    model = model_by_name(args.model)
    if args.q == "truth":
        q_candidate = model.q0
    else:
        q_candidate = _linear_fit_candidate(model, args.seed)
    audit = audit_theorem_bound(model, q_candidate, args.alpha, args.c,
                                mc_size=args.mc, seed=args.seed)
    _write_json(out / "audit.json", audit.to_dict())
    _manifest(out, "audit", {"model": args.model, "alpha": args.alpha,
                             "c": args.c, "mc": args.mc, "seed": args.seed,
                             "q": args.q, "out": str(out)}, started)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="itr",
        description="Estimate individualized treatment rules by weighted "
                    "l1-penalized least squares.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a dataset from a known model")
    p.add_argument("--example", required=True,
                   help="1..4, exampleN, or toy")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--with-prob", action="store_true",
                   help="include the prob column in data.csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit coefficients at a fixed penalty")
    p.add_argument("--data", required=True)
    p.add_argument("--coding", default=None)
    p.add_argument("--basis", choices=["linear", "haar"], default="linear")
    p.add_argument("--method", choices=["l1pls", "ols"], default="l1pls")
    p.add_argument("--lam", type=float, default=0.0)
    p.add_argument("--unpenalized-main", action="store_true",
                   help="leave main treatment-contrast columns unpenalized")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("tune", help="select the penalty by Value-maximizing CV")
    p.add_argument("--data", required=True)
    p.add_argument("--coding", default=None)
    p.add_argument("--basis", choices=["linear", "haar"], default="linear")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--unpenalized-main", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("apply", help="apply a saved rule to new covariates")
    p.add_argument("--rule", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("benchmark", help="run the method comparison study")
    p.add_argument("--example", type=int, required=True)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--sizes", default="32,64,128,256,512,1024")
    p.add_argument("--methods", default="l1pls,ols,pp")
    p.add_argument("--test-size", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("audit", help="audit the Value bound on a known model")
    p.add_argument("--model", required=True, help="example1..example4 or toy")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--mc", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--q", choices=["linear-fit", "truth"], default="linear-fit")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("ITR_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ItrError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("%s", exc)
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
