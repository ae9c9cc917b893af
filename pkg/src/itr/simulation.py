"""Generative models for the simulation study and the benchmark harness.

Examples (1)-(3): X ~ U[-1,1]^5, binary arms {+1,-1} with probability 1/2,
R ~ Normal(1 + 2 X1 + X2 + 0.5 X3 + T0(X,A), 1) with

    (1) T0 = 0
    (2) T0 = 0.424 (1 - X1 - X2) A
    (3) T0 = 0.446 sign(X1) (1 - X1)^2 A

Example (4): X ~ U[0,1], R ~ Normal(Q0(X,A), 1) where Q0(X,+-1) are
blocks-style step functions.  The benchmark compares l1-PLS against OLS and
prognosis prediction, reporting medians and median absolute deviations of
true Value and rule variable count per (method, sample size) cell.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from joblib import Parallel, delayed

from .basis import BasisSpec, TreatmentCoding, binary_coding, build_design
from .data import TrialDataset
from .errors import InputError
from .policy import derive_rule, evaluate_true_value, prognosis_rule
from .solver import FitConfig, fit_ols, fit_prognosis_prediction
from .util import derive_rng

_CENTER_TOL = 1e-10


@dataclass(frozen=True)
class GenerativeModel:
    """A fully known scenario with true Q0, T0 and optimal rule."""

    name: str
    coding: TreatmentCoding
    sample_x: Callable[[np.random.Generator, int], np.ndarray]
    q0: Callable[[np.ndarray, object], np.ndarray]
    noise_sd: float = 1.0
    optimal_value: float | None = None

    def t0(self, x: np.ndarray, arm) -> np.ndarray:
        """Centered treatment effect Q0(x,a) - E[Q0(x,A)|x]."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        mean = np.zeros(x.shape[0])
        for a, prob in zip(self.coding.arms, self.coding.arm_probabilities):
            mean += prob * self.q0(x, a)
        return self.q0(x, arm) - mean

    def t0_matrix(self, x: np.ndarray) -> np.ndarray:
        """(n, n_arms) matrix of T0 values in coding arm order."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.column_stack([self.t0(x, a) for a in self.coding.arms])

    def optimal_rule(self, x: np.ndarray) -> np.ndarray:
        t = self.t0_matrix(x)
        idx = np.argmax(t, axis=1)
        return np.array([self.coding.arms[i] for i in idx], dtype=object)

    def sample(self, n: int, seed: int = 0) -> TrialDataset:
        if n < 1:
            raise InputError("n must be at least 1")
        rng = derive_rng(seed, "dataset", self.name)
        x = self.sample_x(rng, n)
        arm_idx = rng.choice(len(self.coding.arms), size=n,
                             p=self.coding.arm_probabilities)
        arms = np.array([self.coding.arms[i] for i in arm_idx], dtype=object)
        q = np.empty(n)
        for i, a in enumerate(self.coding.arms):
            mask = arm_idx == i
            if np.any(mask):
                q[mask] = self.q0(x[mask], a)
        r = q + self.noise_sd * rng.standard_normal(n)
        prob = self.coding.arm_probabilities[arm_idx]
        return TrialDataset(x, arms, r, prob)


def _uniform_cube(p: int, low: float, high: float):
    def sampler(rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(low, high, size=(n, p))

    return sampler


def _main_effect(x: np.ndarray) -> np.ndarray:
    return 1.0 + 2.0 * x[:, 0] + x[:, 1] + 0.5 * x[:, 2]


# step-function parameters of example (4): Q0(X, a) = sum_j theta_(a),j 1{X < u_(a),j}
EXAMPLE4_THETA = {
    1: np.array([-0.781, 0.730, 0.635, 0.512, -2.278, 1.347, 1.155, -0.030]),
    -1: np.array([-2.068, 1.520, -0.072, -0.637, 1.003, -0.611, -0.305, 1.016]),
}
EXAMPLE4_U = {
    1: np.array([0.028, 0.144, 0.171, 0.298, 0.421, 0.443, 0.463, 0.758]),
    -1: np.array([0.061, 0.215, 0.492, 0.544, 0.6302, 0.650, 0.785, 0.909]),
}


def _example4_q0(x: np.ndarray, arm) -> np.ndarray:
    xv = np.atleast_2d(np.asarray(x, dtype=float))[:, 0]
    theta = EXAMPLE4_THETA[arm]
    u = EXAMPLE4_U[arm]
    return (xv[:, None] < u[None, :]) @ theta


def toy_model() -> GenerativeModel:
    """The mismatch toy model: Q0(X, A) = (X - 1/3)^2 A with X ~ U[-1, 1]."""

    def q0(x, arm):
        xv = np.atleast_2d(np.asarray(x, dtype=float))[:, 0]
        return (xv - 1.0 / 3.0) ** 2 * float(arm)

    return GenerativeModel("toy", binary_coding(), _uniform_cube(1, -1.0, 1.0),
                           q0, optimal_value=4.0 / 9.0)


def example_model(example_id: int) -> GenerativeModel:
    coding = binary_coding()
    if example_id == 1:
        def q0(x, arm):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            return _main_effect(x)

        return GenerativeModel("example1", coding, _uniform_cube(5, -1.0, 1.0),
                               q0, optimal_value=1.0)
    if example_id == 2:
        def q0(x, arm):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            return _main_effect(x) + 0.424 * (1.0 - x[:, 0] - x[:, 1]) * float(arm)

        # E|1 - X1 - X2| = 13/12 under U[-1,1]^2
        return GenerativeModel("example2", coding, _uniform_cube(5, -1.0, 1.0),
                               q0, optimal_value=1.0 + 0.424 * 13.0 / 12.0)
    if example_id == 3:
        def q0(x, arm):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            return _main_effect(x) + 0.446 * np.sign(x[:, 0]) * (1.0 - x[:, 0]) ** 2 * float(arm)

        # optimal adds 0.446 (1 - X1)^2 for X1 != 0; E(1 - X1)^2 = 4/3
        return GenerativeModel("example3", coding, _uniform_cube(5, -1.0, 1.0),
                               q0, optimal_value=1.0 + 0.446 * 4.0 / 3.0)
    if example_id == 4:
        return GenerativeModel("example4", coding, _uniform_cube(1, 0.0, 1.0),
                               _example4_q0, optimal_value=None)
    raise InputError(f"unknown example id: {example_id!r}")


def model_by_name(name: str) -> GenerativeModel:
    if name == "toy":
        return toy_model()
    if name.startswith("example"):
        try:
            return example_model(int(name.removeprefix("example")))
        except ValueError:
            pass
    raise InputError(f"unknown model name: {name!r}")


def generate_example(example_id: int, n: int, seed: int = 0) -> TrialDataset:
    return example_model(example_id).sample(n, seed)


def cohens_d(model: GenerativeModel, mc_size: int = 100_000, seed: int = 0) -> float:
    """Standardized mean response difference between the two arms,
    estimated from simulated (X, A, R) draws."""
    if len(model.coding.arms) != 2:
        raise InputError("Cohen's d requires exactly two arms")
    data = model.sample(mc_size, seed)
    a1, a2 = model.coding.arms
    m1 = np.array([a == a1 for a in data.arms])
    r1, r2 = data.r[m1], data.r[~m1]
    pooled = 0.5 * (np.var(r1, ddof=1) + np.var(r2, ddof=1))
    return float((np.mean(r1) - np.mean(r2)) / np.sqrt(pooled))


def optimal_value(model: GenerativeModel, mc_size: int = 100_000,
                  seed: int = 0) -> float:
    """Monte Carlo mean of max_a Q0(x, a)."""
    rng = derive_rng(seed, "optimal-value", model.name)
    x = model.sample_x(rng, mc_size)
    best = np.column_stack([model.q0(x, a) for a in model.coding.arms]).max(axis=1)
    return float(np.mean(best))


def basis_spec_for(model: GenerativeModel) -> BasisSpec:
    kind = "haar-wavelet" if model.name in ("example4",) else "linear-interaction"
    return BasisSpec(kind=kind)


@dataclass(frozen=True)
class BenchmarkScenario:
    example_id: int
    sample_sizes: tuple[int, ...] = (32, 64, 128, 256, 512, 1024)
    replications: int = 100
    methods: tuple[str, ...] = ("l1pls", "ols", "pp")
    test_size: int = 10_000
    base_seed: int = 0
    folds: int = 10
    n_jobs: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise InputError("replications must be at least 1")
        if any(n < 1 for n in self.sample_sizes):
            raise InputError("sample sizes must be positive")
        unknown = set(self.methods) - {"l1pls", "ols", "pp"}
        if unknown:
            raise InputError(f"unknown methods: {sorted(unknown)}")


@dataclass(frozen=True)
class BenchmarkResult:
    scenario: BenchmarkScenario
    rows: list  # dicts: example, method, n, rep, value, variables
    optimal_value: float

    def summary(self) -> list:
        cells = []
        for method in self.scenario.methods:
            for n in self.scenario.sample_sizes:
                vals = np.array([r["value"] for r in self.rows
                                 if r["method"] == method and r["n"] == n
                                 and np.isfinite(r["value"])])
                nvar = np.array([r["variables"] for r in self.rows
                                 if r["method"] == method and r["n"] == n
                                 and np.isfinite(r["value"])], dtype=float)
                med_v = float(np.median(vals)) if vals.size else float("nan")
                mad_v = float(np.median(np.abs(vals - med_v))) if vals.size else float("nan")
                med_k = float(np.median(nvar)) if nvar.size else float("nan")
                mad_k = float(np.median(np.abs(nvar - med_k))) if nvar.size else float("nan")
                cells.append({
                    "example": self.scenario.example_id, "method": method, "n": n,
                    "median_value": med_v, "mad_value": mad_v,
                    "median_vars": med_k, "mad_vars": mad_k,
                    "optimal_value": self.optimal_value,
                })
        return cells


def _fit_method(method: str, dataset: TrialDataset, model: GenerativeModel,
                spec: BasisSpec, folds: int, seed: int):
    from .tuning import select_lambda  # deferred: tuning imports this module's types

    coding = model.coding
    if method == "l1pls":
        report = select_lambda(dataset, coding, spec, folds=folds, seed=seed)
        return report.rule, report.rule.variable_count()
    if method == "ols":
        design = build_design(dataset, coding, spec)
        rule = derive_rule(fit_ols(design, dataset.r), design)
        return rule, rule.variable_count()
    if method == "pp":
        pfit = fit_prognosis_prediction(dataset, coding, spec,
                                        folds=folds, seed=seed)
        rule = prognosis_rule(pfit)
        return rule, rule.variable_count()
    raise InputError(f"unknown method: {method!r}")


def _replication(scenario: BenchmarkScenario, model: GenerativeModel,
                 spec: BasisSpec, n: int, rep: int) -> list:
    data_seed = int(derive_rng(scenario.base_seed, "rep", scenario.example_id,
                               n, rep).integers(2**31))
    test_seed = int(derive_rng(scenario.base_seed, "test", scenario.example_id,
                               n, rep).integers(2**31))
    dataset = model.sample(n, data_seed)
    rows = []
    for method in scenario.methods:
        row = {"example": scenario.example_id, "method": method,
               "n": n, "rep": rep, "value": float("nan"),
               "variables": float("nan"), "error": ""}
        try:
            rule, nvar = _fit_method(method, dataset, model, spec,
                                     scenario.folds, data_seed)
            row["value"] = evaluate_true_value(rule, model,
                                               scenario.test_size, test_seed)
            row["variables"] = nvar
        except Exception as exc:  # failures are recorded per cell, not fatal
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def run_benchmark(scenario: BenchmarkScenario) -> BenchmarkResult:
    model = example_model(scenario.example_id)
    spec = basis_spec_for(model)
    jobs = [(n, rep) for n in scenario.sample_sizes
            for rep in range(scenario.replications)]
    if scenario.n_jobs != 1:
        chunks = Parallel(n_jobs=scenario.n_jobs)(
            delayed(_replication)(scenario, model, spec, n, rep) for n, rep in jobs
        )
    else:
        chunks = [_replication(scenario, model, spec, n, rep) for n, rep in jobs]
    rows = [row for chunk in chunks for row in chunk]
    opt = optimal_value(model, max(scenario.test_size, 100_000),
                        seed=scenario.base_seed)
    return BenchmarkResult(scenario, rows, opt)


def write_results_csv(result: BenchmarkResult, path) -> None:
    fields = ["example", "method", "n", "rep", "value", "variables", "error"]
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(result.rows)


def write_summary_csv(result: BenchmarkResult, path) -> None:
    fields = ["example", "method", "n", "median_value", "mad_value",
              "median_vars", "mad_vars", "optimal_value"]
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(result.summary())
