"""Weighted l1-penalized least squares by cyclic coordinate descent,
plus the OLS and per-arm prognosis-prediction comparators.

The objective is

    E_n[R - Phi theta]^2 + lambda * sum_{j penalized} sigma_hat_j |theta_j|

with sigma_hat_j = sqrt(E_n phi_j^2).  Coordinate updates are exact
soft-threshold steps on the Gram system; unpenalized columns are solved
exactly by least squares before the sweeps start.  Columns with
sigma_hat_j = 0 stay frozen at 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .basis import BasisSpec, DesignMatrix, TreatmentCoding, build_covariate_design
from .data import TrialDataset
from .errors import InputError

_DEFAULT_TOL = 1e-7
_DEFAULT_SWEEPS = 10_000
# relative slack in the soft-threshold zero test; keeps coefficients exactly
# zero at the lambda_max boundary despite rounding
_ZERO_SLACK = 1e-12


@dataclass(frozen=True)
class FitConfig:
    tolerance: float = _DEFAULT_TOL
    max_sweeps: int = _DEFAULT_SWEEPS
    lambda_grid: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.tolerance <= 0:
            raise InputError("tolerance must be positive")
        if self.max_sweeps < 1:
            raise InputError("max_sweeps must be at least 1")
        if self.lambda_grid is not None:
            grid = tuple(float(v) for v in self.lambda_grid)
            object.__setattr__(self, "lambda_grid", grid)
            if any(b >= a for a, b in zip(grid, grid[1:])):
                raise InputError("lambda_grid must be strictly decreasing")


@dataclass(frozen=True)
class CoefficientFit:
    theta: np.ndarray
    lam: float
    objective: float
    kkt_max_violation: float
    nonzero_count: int
    converged: bool
    sweeps: int = 0

    def to_dict(self, design: DesignMatrix | None = None) -> dict:
        coeffs = []
        names = [c.name for c in design.columns] if design is not None else None
        groups = [c.group for c in design.columns] if design is not None else None
        for j, v in enumerate(self.theta):
            coeffs.append({
                "name": names[j] if names else f"col{j}",
                "group": groups[j] if groups else "",
                "value": float(v),
            })
        return {
            "lambda": self.lam,
            "converged": self.converged,
            "kkt_max_violation": self.kkt_max_violation,
            "coefficients": coeffs,
        }


@njit(cache=True)
def _cd_sweeps(G, b, sig, pen, active, lam, theta, tol, max_sweeps):
    J = theta.shape[0]
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        delta = 0.0
        for j in range(J):
            if not active[j]:
                continue
            cj = G[j, j]
            zj = b[j] - np.dot(G[j], theta) + cj * theta[j]
            if pen[j]:
                t = 0.5 * lam * sig[j]
                az = abs(zj)
                excess = az - t
                if excess <= _ZERO_SLACK * (az + t):
                    new = 0.0
                else:
                    new = excess / cj if zj > 0 else -excess / cj
            else:
                new = zj / cj
            d = sig[j] * abs(new - theta[j])
            if d > delta:
                delta = d
            theta[j] = new
        if delta < tol:
            return sweeps, True
    return sweeps, False


class _Problem:
    """Gram-form problem shared across a lambda path."""

    def __init__(self, design: DesignMatrix, response: np.ndarray):
        response = np.asarray(response, dtype=float)
        if response.ndim != 1 or response.shape[0] != design.n:
            raise InputError("response length does not match the design")
        if not np.all(np.isfinite(response)):
            raise InputError("non-finite response values")
        self.design = design
        self.response = response
        phi = design.values
        n = design.n
        self.G = phi.T @ phi / n
        self.b = phi.T @ response / n
        self.sigma = design.sigma_hats
        self.penalized = design.penalized
        self.active = self.sigma > 0
        self.mean_r2 = float(np.mean(response**2))

    def solve_unpenalized(self, theta: np.ndarray) -> None:
        """Exact least-squares update of the active unpenalized block."""
        u = (~self.penalized) & self.active
        if not np.any(u):
            return
        rest = ~u
        rhs = self.b[u] - self.G[np.ix_(u, rest)] @ theta[rest]
        sol, *_ = np.linalg.lstsq(self.G[np.ix_(u, u)], rhs, rcond=None)
        theta[u] = sol

    def fit(self, lam: float, config: FitConfig,
            warm_start: np.ndarray | None = None) -> CoefficientFit:
        if lam < 0 or not np.isfinite(lam):
            raise InputError("lambda must be a finite nonnegative real")
        J = self.G.shape[0]
        if warm_start is not None:
            theta = np.asarray(warm_start, dtype=float).copy()
            if theta.shape != (J,):
                raise InputError("warm start length mismatch")
        else:
            theta = np.zeros(J)
        theta[~self.active] = 0.0
        self.solve_unpenalized(theta)
        sweeps, converged = _cd_sweeps(
            self.G, self.b, self.sigma, self.penalized, self.active,
            float(lam), theta, config.tolerance, config.max_sweeps,
        )
        return self._finish(theta, lam, sweeps, converged)

    def _finish(self, theta, lam, sweeps, converged) -> CoefficientFit:
        resid = self.design.values @ theta - self.response
        objective = float(np.mean(resid**2)) + lam * float(
            np.sum(self.sigma[self.penalized] * np.abs(theta[self.penalized]))
        )
        grad = 2.0 * (self.design.values.T @ resid) / self.design.n
        kkt = 0.0
        for j in range(theta.shape[0]):
            if not self.active[j]:
                continue
            if self.penalized[j]:
                if theta[j] != 0.0:
                    v = abs(grad[j] + lam * self.sigma[j] * np.sign(theta[j]))
                else:
                    v = max(abs(grad[j]) - lam * self.sigma[j], 0.0)
            else:
                v = abs(grad[j]) / 2.0
            kkt = max(kkt, v)
        return CoefficientFit(
            theta=theta, lam=float(lam), objective=objective,
            kkt_max_violation=float(kkt),
            nonzero_count=int(np.count_nonzero(theta)),
            converged=bool(converged), sweeps=int(sweeps),
        )

    def lambda_max(self) -> float:
        pen = self.penalized & self.active
        if not np.any(pen):
            raise InputError("no penalized column with positive scale")
        theta = np.zeros(self.G.shape[0])
        self.solve_unpenalized(theta)
        corr = self.b[pen] - self.G[np.ix_(pen, ~pen)] @ theta[~pen]
        return float(np.max(2.0 * np.abs(corr) / self.sigma[pen]))


def fit_weighted_lasso(design: DesignMatrix, response, lam: float,
                       config: FitConfig | None = None,
                       warm_start: np.ndarray | None = None) -> CoefficientFit:
    config = config or FitConfig()
    return _Problem(design, response).fit(lam, config, warm_start)


def lambda_max(design: DesignMatrix, response) -> float:
    """Smallest lambda at which every penalized coefficient is zero."""
    return _Problem(design, response).lambda_max()


def default_lambda_grid(lam_max: float, size: int = 100,
                        ratio: float = 1e-4) -> np.ndarray:
    """Log-spaced grid from lam_max down to lam_max*ratio with 0 appended;
    collapses to the single point 0 when lam_max is degenerate."""
    if lam_max <= 0:
        return np.array([0.0])
    grid = np.geomspace(lam_max, lam_max * ratio, size)
    return np.append(grid, 0.0)


def lasso_path(design: DesignMatrix, response, grid,
               config: FitConfig | None = None) -> list[CoefficientFit]:
    """Fit a descending lambda grid with warm starts."""
    config = config or FitConfig()
    problem = _Problem(design, response)
    fits = []
    warm = None
    for lam in grid:
        fit = problem.fit(float(lam), config, warm)
        warm = fit.theta
        fits.append(fit)
    return fits


def fit_ols(design: DesignMatrix, response) -> CoefficientFit:
    """Minimum-norm least squares (pseudoinverse semantics)."""
    response = np.asarray(response, dtype=float)
    if response.shape[0] != design.n:
        raise InputError("response length does not match the design")
    if not np.all(np.isfinite(response)):
        raise InputError("non-finite response values")
    phi = design.values
    u, s, vt = np.linalg.svd(phi, full_matrices=False)
    cutoff = 1e-10 * (s[0] if s.size else 0.0)
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    theta = vt.T @ (inv * (u.T @ response))
    resid = phi @ theta - response
    objective = float(np.mean(resid**2))
    kkt = float(np.max(np.abs(phi.T @ resid) / design.n)) if design.n_columns else 0.0
    return CoefficientFit(theta=theta, lam=0.0, objective=objective,
                          kkt_max_violation=kkt,
                          nonzero_count=int(np.count_nonzero(theta)),
                          converged=True)


@dataclass(frozen=True)
class PrognosisFit:
    """Per-arm penalized least-squares fits of E(R | X, A=a)."""

    coding: TreatmentCoding
    fits: dict  # arm -> CoefficientFit
    designs: dict = field(repr=False, default_factory=dict)  # arm -> DesignMatrix
    chosen_lambdas: dict = field(default_factory=dict)


def fit_prognosis_prediction(dataset: TrialDataset, coding: TreatmentCoding,
                             spec: BasisSpec | None = None,
                             config: FitConfig | None = None,
                             folds: int = 10, seed: int = 0) -> PrognosisFit:
    """Fit the covariate-only basis per arm, tuning each arm's lambda by
    minimizing 10-fold cross-validated prediction error."""
    from .tuning import cv_partition  # local import to avoid a module cycle

    spec = spec or BasisSpec()
    config = config or FitConfig()
    fits: dict = {}
    designs: dict = {}
    chosen: dict = {}
    for arm in coding.arms:
        mask = np.array([a == arm for a in dataset.arms])
        count = int(mask.sum())
        if count < folds:
            raise InputError(
                f"arm {arm!r} has only {count} observations (< {folds} folds)"
            )
        sub = dataset.subset(mask)
        design = build_covariate_design(sub, spec)
        if config.lambda_grid is not None:
            grid = np.asarray(config.lambda_grid)
        else:
            try:
                grid = default_lambda_grid(lambda_max(design, sub.r))
            except InputError:
                grid = np.array([0.0])
        assignment = cv_partition(count, folds, seed)
        sse = np.zeros(len(grid))
        for fold in range(folds):
            test = assignment == fold
            train = ~test
            train_data = sub.subset(train)
            train_design = build_covariate_design(train_data, spec)
            path = lasso_path(train_design, train_data.r, grid, config)
            test_rows = train_design.evaluate_rows(sub.x[test])
            for gi, fit in enumerate(path):
                resid = sub.r[test] - test_rows @ fit.theta
                sse[gi] += float(np.sum(resid**2))
        best = int(np.argmin(sse))
        path = lasso_path(design, sub.r, grid, config)
        fits[arm] = path[best]
        designs[arm] = design
        chosen[arm] = float(grid[best])
    return PrognosisFit(coding=coding, fits=fits, designs=designs,
                        chosen_lambdas=chosen)
