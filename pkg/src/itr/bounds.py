"""Empirical audits of the finite-sample Value bounds.

The margin of the true treatment effect at x is the gap between the best
and the best suboptimal arm of T0(x, .); the margin condition bounds
P(margin <= eps) by C eps^alpha.  Under it, for any rule d derived from a
square-integrable Q,

    V(d0) - V(d) <= C' [L(Q) - L(Q0)]^{(1+alpha)/(2+alpha)}
    V(d0) - V(d) <= C' [E (T - T0)^2]^{(1+alpha)/(2+alpha)}

with C' = (2^{2+3 alpha} S^{1+alpha} C)^{1/(2+alpha)}, where S bounds
1/p(a|x).  The hard-margin variant (margin mass below eps is zero) gives
V(d0) - V(d) <= 4 S [L(Q) - L(Q0)] / eps.  All expectations here are
estimated by Monte Carlo, and the "holds" flags allow 3 standard errors
of slack so that sampling noise cannot produce false violations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .simulation import GenerativeModel
from .util import derive_rng

_ARGMAX_TOL = 1e-12


@dataclass(frozen=True)
class MarginEstimate:
    epsilon_grid: np.ndarray
    cdf_values: np.ndarray
    fitted_C: float
    fitted_alpha: float
    fit_residual: float

    def to_dict(self) -> dict:
        return {
            "epsilon_grid": self.epsilon_grid.tolist(),
            "cdf_values": self.cdf_values.tolist(),
            "fitted_C": self.fitted_C,
            "fitted_alpha": self.fitted_alpha,
            "fit_residual": self.fit_residual,
        }


@dataclass(frozen=True)
class BoundAudit:
    lhs: float
    rhs_q: float
    rhs_t: float
    constant_cprime: float
    holds_q: bool
    holds_t: bool
    lhs_se: float = 0.0
    excess_q: float = 0.0
    excess_t: float = 0.0

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs, "rhs_q": self.rhs_q, "rhs_t": self.rhs_t,
            "constant_cprime": self.constant_cprime,
            "holds_q": self.holds_q, "holds_t": self.holds_t,
            "lhs_se": self.lhs_se,
            "excess_q": self.excess_q, "excess_t": self.excess_t,
        }


def margin_quantities(model: GenerativeModel, x_sample: np.ndarray) -> np.ndarray:
    """Per-x gap between the optimal and best suboptimal arm of T0(x, .);
    +inf where T0(x, .) is constant over arms."""
    if len(model.coding.arms) < 2:
        raise InputError("margin requires at least two arms")
    t = model.t0_matrix(x_sample)
    best = t.max(axis=1)
    in_argmax = t >= best[:, None] - _ARGMAX_TOL
    sub = np.where(in_argmax, -np.inf, t).max(axis=1)
    return best - sub  # +inf when every arm is optimal


def bound_s(model: GenerativeModel) -> float:
    """S with p(a|x) >= 1/S, for constant randomization."""
    return float(1.0 / model.coding.arm_probabilities.min())


def c_prime(alpha: float, C: float, S: float) -> float:
    return float((2.0 ** (2 + 3 * alpha) * S ** (1 + alpha) * C) ** (1.0 / (2 + alpha)))


def estimate_margin_constants(model: GenerativeModel, epsilon_grid,
                              mc_size: int = 100_000,
                              seed: int = 0) -> MarginEstimate:
    epsilon_grid = np.asarray(epsilon_grid, dtype=float)
    if np.any(epsilon_grid <= 0) or np.any(np.diff(epsilon_grid) <= 0):
        raise InputError("epsilon grid must be positive and increasing")
    rng = derive_rng(seed, "margin", model.name)
    x = model.sample_x(rng, mc_size)
    margins = margin_quantities(model, x)
    cdf = np.array([float(np.mean(margins <= e)) for e in epsilon_grid])
    interior = (cdf > 0.0) & (cdf < 1.0)
    if not np.any(interior):
        # hard-margin regime: no mass below any grid epsilon
        return MarginEstimate(epsilon_grid, cdf, 0.0, math.inf, 0.0)
    logx = np.log(epsilon_grid[interior])
    logy = np.log(cdf[interior])
    design = np.column_stack([np.ones_like(logx), logx])
    coef, *_ = np.linalg.lstsq(design, logy, rcond=None)
    resid = logy - design @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    return MarginEstimate(epsilon_grid, cdf, float(np.exp(coef[0])),
                          float(coef[1]), rms)


def _rule_from_q(model: GenerativeModel, q_candidate) -> callable:
    arms = model.coding.arms

    def rule(x: np.ndarray) -> np.ndarray:
        scores = np.column_stack([q_candidate(x, a) for a in arms])
        idx = np.argmax(scores, axis=1)
        return idx  # arm indices, ties to the first arm in coding order

    return rule


def _center_over_arms(model: GenerativeModel, q_candidate, x: np.ndarray) -> np.ndarray:
    """(n, n_arms) matrix of the arm-probability-centered candidate."""
    q = np.column_stack([q_candidate(x, a) for a in model.coding.arms])
    mean = q @ model.coding.arm_probabilities
    return q - mean[:, None]


def _excess_moments(model: GenerativeModel, q_candidate, x: np.ndarray,
                    arm_idx: np.ndarray):
    """Monte Carlo excess prediction errors E(Q - Q0)^2 and E(T - T0)^2 on
    sampled (x, a) with standard errors."""
    n = x.shape[0]
    q0 = np.column_stack([model.q0(x, a) for a in model.coding.arms])
    q = np.column_stack([q_candidate(x, a) for a in model.coding.arms])
    t0 = q0 - (q0 @ model.coding.arm_probabilities)[:, None]
    t = q - (q @ model.coding.arm_probabilities)[:, None]
    rows = np.arange(n)
    dq = (q[rows, arm_idx] - q0[rows, arm_idx]) ** 2
    dt = (t[rows, arm_idx] - t0[rows, arm_idx]) ** 2
    return (float(np.mean(dq)), float(np.std(dq) / math.sqrt(n)),
            float(np.mean(dt)), float(np.std(dt) / math.sqrt(n)))


def _value_gap(model: GenerativeModel, q_candidate, x: np.ndarray):
    """V(d0) - V(d) for d = argmax_a q_candidate, on a shared x sample."""
    q0 = np.column_stack([model.q0(x, a) for a in model.coding.arms])
    scores = np.column_stack([q_candidate(x, a) for a in model.coding.arms])
    idx = np.argmax(scores, axis=1)
    gap = q0.max(axis=1) - q0[np.arange(x.shape[0]), idx]
    return float(np.mean(gap)), float(np.std(gap) / math.sqrt(x.shape[0]))


def _power_slack(cprime: float, excess: float, se: float, exponent: float) -> float:
    """3-SE slack for c' * excess^e, finite even at excess = 0."""
    return cprime * ((excess + 3.0 * se) ** exponent - excess**exponent)


def audit_theorem_bound(model: GenerativeModel, q_candidate,
                        alpha: float, C: float,
                        mc_size: int = 100_000, seed: int = 0) -> BoundAudit:
    if alpha < 0 or C <= 0:
        raise InputError("margin constants require C > 0 and alpha >= 0")
    S = bound_s(model)
    cp = c_prime(alpha, C, S)
    exponent = (1.0 + alpha) / (2.0 + alpha)

    rng = derive_rng(seed, "audit", model.name)
    x = model.sample_x(rng, mc_size)
    arm_idx = rng.choice(len(model.coding.arms), size=mc_size,
                         p=model.coding.arm_probabilities)

    lhs, lhs_se = _value_gap(model, q_candidate, x)
    eq, eq_se, et, et_se = _excess_moments(model, q_candidate, x, arm_idx)

    rhs_q = cp * eq**exponent
    rhs_t = cp * et**exponent
    holds_q = lhs <= rhs_q + 3.0 * lhs_se + _power_slack(cp, eq, eq_se, exponent)
    holds_t = lhs <= rhs_t + 3.0 * lhs_se + _power_slack(cp, et, et_se, exponent)
    return BoundAudit(lhs=lhs, rhs_q=float(rhs_q), rhs_t=float(rhs_t),
                      constant_cprime=cp, holds_q=bool(holds_q),
                      holds_t=bool(holds_t), lhs_se=lhs_se,
                      excess_q=eq, excess_t=et)


def audit_hard_margin_bound(model: GenerativeModel, q_candidate,
                            epsilon: float, mc_size: int = 100_000,
                            seed: int = 0) -> BoundAudit:
    if epsilon <= 0:
        raise InputError("epsilon must be positive")
    S = bound_s(model)
    rng = derive_rng(seed, "hard-margin", model.name)
    x = model.sample_x(rng, mc_size)
    margins = margin_quantities(model, x)
    if np.any(margins < epsilon):
        raise InputError(
            f"empirical margin mass below epsilon={epsilon}: hard-margin "
            "condition violated"
        )
    arm_idx = rng.choice(len(model.coding.arms), size=mc_size,
                         p=model.coding.arm_probabilities)
    lhs, lhs_se = _value_gap(model, q_candidate, x)
    eq, eq_se, et, et_se = _excess_moments(model, q_candidate, x, arm_idx)
    factor = 4.0 * S / epsilon
    rhs_q = factor * eq
    rhs_t = factor * et
    holds_q = lhs <= rhs_q + 3.0 * (lhs_se + factor * eq_se)
    holds_t = lhs <= rhs_t + 3.0 * (lhs_se + factor * et_se)
    # constant_cprime stores the multiplicative factor 4S/eps for this variant
    return BoundAudit(lhs=lhs, rhs_q=float(rhs_q), rhs_t=float(rhs_t),
                      constant_cprime=float(factor), holds_q=bool(holds_q),
                      holds_t=bool(holds_t), lhs_se=lhs_se,
                      excess_q=eq, excess_t=et)
