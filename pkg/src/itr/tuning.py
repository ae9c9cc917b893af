"""Three-stage penalty selection by 10-fold cross-validation.

Stage 1 keeps the lambdas maximizing the cross-validated IPW Value of the
induced rule; stage 2 keeps those whose full-data rule uses the fewest
variables; stage 3 breaks remaining ties by minimal cross-validated
prediction error.  The deliverable is the full-data refit at the chosen
lambda.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSpec, TreatmentCoding, build_design
from .data import TrialDataset
from .errors import InputError
from .policy import TreatmentRule, derive_rule, estimate_value
from .solver import (
    CoefficientFit,
    FitConfig,
    default_lambda_grid,
    lambda_max,
    lasso_path,
)
from .util import derive_rng


def cv_partition(n: int, folds: int, seed: int = 0) -> np.ndarray:
    """Seeded uniform random partition into folds of sizes differing by at
    most one; returns the fold id of each index."""
    if folds < 2:
        raise InputError("folds must be at least 2")
    if n < folds:
        raise InputError(f"cannot split {n} observations into {folds} folds")
    rng = derive_rng(seed, "cv-partition", n, folds)
    base = np.repeat(np.arange(folds), n // folds)
    extra = rng.choice(folds, size=n % folds, replace=False)
    assignment = np.concatenate([base, extra])
    rng.shuffle(assignment)
    return assignment


def stratified_cv_partition(arms: np.ndarray, folds: int, seed: int = 0) -> np.ndarray:
    """Partition stratified by arm; fold sizes within each arm differ by at
    most one."""
    arms = np.asarray(arms, dtype=object)
    n = arms.shape[0]
    assignment = np.empty(n, dtype=int)
    for k, arm in enumerate(dict.fromkeys(arms.tolist())):
        idx = np.flatnonzero([a == arm for a in arms])
        if idx.size < folds:
            raise InputError(f"arm {arm!r} has fewer observations than folds")
        assignment[idx] = cv_partition(idx.size, folds, seed + k)
    return assignment


@dataclass(frozen=True)
class TuningReport:
    lambda_grid: np.ndarray
    cv_value: np.ndarray  # nan where undefined
    cv_prediction_error: np.ndarray
    rule_variable_count: np.ndarray
    stage1_survivors: tuple[int, ...]
    stage2_survivors: tuple[int, ...]
    chosen_index: int
    chosen_lambda: float
    fit: CoefficientFit = field(repr=False)
    rule: TreatmentRule = field(repr=False)

    def to_dict(self) -> dict:
        def _clean(arr):
            return [None if not np.isfinite(v) else float(v) for v in arr]

        return {
            "lambda_grid": [float(v) for v in self.lambda_grid],
            "cv_value": _clean(self.cv_value),
            "cv_prediction_error": _clean(self.cv_prediction_error),
            "rule_variable_count": [int(v) for v in self.rule_variable_count],
            "stage1_survivors": list(self.stage1_survivors),
            "stage2_survivors": list(self.stage2_survivors),
            "chosen_index": self.chosen_index,
            "chosen_lambda": self.chosen_lambda,
        }


def select_lambda(dataset: TrialDataset, coding: TreatmentCoding,
                  spec: BasisSpec | None = None,
                  grid=None, folds: int = 10, seed: int = 0,
                  config: FitConfig | None = None,
                  value_tie_rtol: float = 0.0,
                  stratify: bool = False) -> TuningReport:
    spec = spec or BasisSpec()
    config = config or FitConfig()

    full_design = build_design(dataset, coding, spec)
    if grid is None:
        if config.lambda_grid is not None:
            grid = np.asarray(config.lambda_grid, dtype=float)
        else:
            try:
                grid = default_lambda_grid(lambda_max(full_design, dataset.r))
            except InputError:
                grid = np.array([0.0])
    else:
        grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise InputError("lambda grid is empty")

    if stratify:
        assignment = stratified_cv_partition(dataset.arms, folds, seed)
    else:
        assignment = cv_partition(dataset.n, folds, seed)

    n_lam = grid.size
    value_sum = np.zeros(n_lam)
    value_cnt = np.zeros(n_lam, dtype=int)
    pe_sum = np.zeros(n_lam)
    for fold in range(folds):
        test = assignment == fold
        train_data = dataset.subset(~test)
        test_data = dataset.subset(test)
        # sigma_hat weights and wavelet k-ranges come from the training fold
        train_design = build_design(train_data, coding, spec)
        path = lasso_path(train_design, train_data.r, grid, config)
        test_rows = train_design.evaluate_rows(test_data.x, test_data.arms)
        for gi, fit in enumerate(path):
            rule = derive_rule(fit, train_design, coding)
            est = estimate_value(rule, test_data)
            if est.value is not None:
                value_sum[gi] += est.value
                value_cnt[gi] += 1
            resid = test_data.r - test_rows @ fit.theta
            pe_sum[gi] += float(np.mean(resid**2))

    cv_value = np.where(value_cnt > 0, value_sum / np.maximum(value_cnt, 1), np.nan)
    cv_pe = pe_sum / folds

    defined = np.isfinite(cv_value)
    if not np.any(defined):
        raise InputError(
            "every lambda produced an undefined CV Value; extend the grid toward 0"
        )
    best = np.nanmax(cv_value)
    tol = value_tie_rtol * abs(best)
    stage1 = tuple(int(i) for i in np.flatnonzero(defined & (cv_value >= best - tol)))

    full_path = lasso_path(full_design, dataset.r, grid, config)
    rules = [derive_rule(fit, full_design, coding) for fit in full_path]
    counts = np.array([r.variable_count() for r in rules])

    min_count = counts[list(stage1)].min()
    stage2 = tuple(i for i in stage1 if counts[i] == min_count)

    stage2_pe = cv_pe[list(stage2)]
    chosen = stage2[int(np.argmin(stage2_pe))]

    return TuningReport(
        lambda_grid=grid, cv_value=cv_value, cv_prediction_error=cv_pe,
        rule_variable_count=counts, stage1_survivors=stage1,
        stage2_survivors=stage2, chosen_index=int(chosen),
        chosen_lambda=float(grid[chosen]), fit=full_path[chosen],
        rule=rules[chosen],
    )
