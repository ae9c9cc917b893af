"""Treatment rules, IPW value estimation and prediction error."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import (
    TREATMENT,
    DesignMatrix,
    TreatmentCoding,
    features_from_dict,
)
from .data import TrialDataset
from .errors import InputError
from .solver import CoefficientFit, PrognosisFit
from .util import derive_rng


def _argmax_arms(scores: np.ndarray, arms: tuple) -> np.ndarray:
    """Row-wise argmax; ties go to the earliest arm in the given order."""
    idx = np.argmax(scores, axis=1)
    return np.array([arms[i] for i in idx], dtype=object)


@dataclass(frozen=True)
class TreatmentRule:
    """argmax over arms of the treatment-part linear score.

    ``treatment_coefficients`` has shape (n_features, K): row f, column k is
    the coefficient on (feature_f * contrast_k).  The score of arm a at x is
    features(x) @ coefficients @ contrasts[a]; main-effect columns are
    arm-constant and cannot change the argmax, so they are not needed.
    """

    coding: TreatmentCoding
    feature_basis: object
    treatment_coefficients: np.ndarray  # (n_features, K)
    tie_break: tuple = ()

    def __post_init__(self):
        coefs = np.atleast_2d(np.asarray(self.treatment_coefficients, dtype=float))
        object.__setattr__(self, "treatment_coefficients", coefs)
        if coefs.shape != (len(self.feature_basis.names), self.coding.n_contrasts):
            raise InputError("treatment coefficient shape mismatch")
        tie = tuple(self.tie_break) or self.coding.arms
        if set(tie) != set(self.coding.arms):
            raise InputError("tie_break must order exactly the coding's arms")
        object.__setattr__(self, "tie_break", tie)

    def scores(self, x: np.ndarray) -> np.ndarray:
        """(n, n_arms) treatment scores in tie_break arm order."""
        feats = self.feature_basis.evaluate(x)
        per_contrast = feats @ self.treatment_coefficients  # (n, K)
        order = [self.coding.index_of(a) for a in self.tie_break]
        return per_contrast @ self.coding.contrasts[order].T

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return _argmax_arms(self.scores(x), self.tie_break)

    def variable_count(self) -> int:
        """Number of terms needed for treatment assignment: distinct basis
        functions with any nonzero treatment coefficient, the main
        treatment (intercept-feature) term included."""
        used = np.any(self.treatment_coefficients != 0.0, axis=1)
        return int(np.count_nonzero(used))

    def to_dict(self) -> dict:
        terms = []
        names = self.feature_basis.names
        for f in range(self.treatment_coefficients.shape[0]):
            for k in range(self.treatment_coefficients.shape[1]):
                v = self.treatment_coefficients[f, k]
                if v != 0.0:
                    terms.append({"basis_name": names[f], "contrast_index": k,
                                  "coefficient": float(v)})
        return {
            "coding": self.coding.to_dict(),
            "basis": self.feature_basis.to_dict(),
            "terms": terms,
            "tie_break": list(self.tie_break),
        }

    @staticmethod
    def from_dict(d: dict) -> "TreatmentRule":
        coding = TreatmentCoding.from_dict(d["coding"])
        basis = features_from_dict(d["basis"])
        coefs = np.zeros((len(basis.names), coding.n_contrasts))
        name_index = {n: i for i, n in enumerate(basis.names)}
        for term in d["terms"]:
            coefs[name_index[term["basis_name"]], term["contrast_index"]] = term["coefficient"]
        return TreatmentRule(coding, basis, coefs, tuple(d["tie_break"]))


def save_rule_json(rule: TreatmentRule, path) -> None:
    Path(path).write_text(json.dumps(rule.to_dict(), sort_keys=True, indent=2) + "\n")


def load_rule_json(path) -> TreatmentRule:
    return TreatmentRule.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ConstantRule:
    """A rule that recommends one arm everywhere."""

    coding: TreatmentCoding
    arm: object

    def __post_init__(self):
        self.coding.index_of(self.arm)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        n = np.atleast_2d(np.asarray(x)).shape[0]
        return np.array([self.arm] * n, dtype=object)


@dataclass(frozen=True)
class PrognosisRule:
    """argmax over arms of per-arm prognosis predictions."""

    coding: TreatmentCoding
    bases: dict  # arm -> feature basis
    thetas: dict  # arm -> coefficient vector
    tie_break: tuple = ()

    def __post_init__(self):
        tie = tuple(self.tie_break) or self.coding.arms
        object.__setattr__(self, "tie_break", tie)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        scores = np.column_stack([
            self.bases[a].evaluate(x) @ self.thetas[a] for a in self.tie_break
        ])
        return _argmax_arms(scores, self.tie_break)

    def variable_count(self) -> int:
        """Count of basis terms used by the induced rule: covariate terms
        nonzero in any arm, plus one main-treatment term when the
        intercepts differ across arms."""
        names: set[str] = set()
        intercepts = []
        for a in self.coding.arms:
            theta = self.thetas[a]
            intercepts.append(theta[0])
            for f in range(1, len(theta)):
                if theta[f] != 0.0:
                    names.add(self.bases[a].names[f])
        main = 0 if np.ptp(intercepts) == 0 else 1
        return main + len(names)


def prognosis_rule(pfit: PrognosisFit, tie_break: tuple = ()) -> PrognosisRule:
    bases = {a: pfit.designs[a].feature_basis for a in pfit.coding.arms}
    thetas = {a: pfit.fits[a].theta for a in pfit.coding.arms}
    return PrognosisRule(pfit.coding, bases, thetas, tie_break)


def derive_rule(fit: CoefficientFit, design: DesignMatrix,
                coding: TreatmentCoding | None = None,
                tie_break: tuple = ()) -> TreatmentRule:
    """Extract the treatment-part coefficients of a fit as a rule."""
    coding = coding or design.coding
    if coding is None:
        raise InputError("a treatment coding is required to derive a rule")
    if fit.theta.shape[0] != design.n_columns:
        raise InputError("coefficient length does not match design metadata")
    coefs = np.zeros((design.n_features, coding.n_contrasts))
    for j, col in enumerate(design.columns):
        if col.group == TREATMENT:
            coefs[col.feature_index, col.contrast_index] = fit.theta[j]
    return TreatmentRule(coding, design.feature_basis, coefs, tie_break)


@dataclass(frozen=True)
class ValueEstimate:
    value: float | None
    numerator: float
    denominator: float
    matched_count: int

    def to_dict(self) -> dict:
        return {"value": self.value, "numerator": self.numerator,
                "denominator": self.denominator, "matched_count": self.matched_count}


def estimate_value(rule, dataset: TrialDataset) -> ValueEstimate:
    """IPW ratio estimator of V(d) from trial data with known propensities."""
    if dataset.propensity is not None:
        prob = dataset.propensity
    else:
        idx = rule.coding.arm_indices(dataset.arms)
        prob = rule.coding.arm_probabilities[idx]
    if np.any(prob <= 0):
        raise InputError("propensities must be strictly positive")
    recommended = rule.evaluate(dataset.x)
    match = np.array([a == b for a, b in zip(dataset.arms, recommended)])
    weights = match / prob
    numerator = float(np.mean(weights * dataset.r))
    denominator = float(np.mean(weights))
    matched = int(match.sum())
    value = numerator / denominator if matched > 0 else None
    return ValueEstimate(value, numerator, denominator, matched)


def prediction_error(fit: CoefficientFit, design: DesignMatrix, response) -> float:
    """Mean squared residual of the fit on the supplied rows."""
    response = np.asarray(response, dtype=float)
    if response.shape[0] != design.n:
        raise InputError("response length does not match the design")
    resid = response - design.values @ fit.theta
    return float(np.mean(resid**2))


def evaluate_true_value(rule, model, test_size: int = 10_000,
                        seed: int = 0) -> float:
    """Monte Carlo plug-in Value: mean of Q0(x, rule(x)) on fresh draws.

    Valid because V(d) = E[Q0(X, d(X))]; skipping the response noise cuts
    the Monte Carlo variance.
    """
    if test_size < 1:
        raise InputError("test_size must be at least 1")
    rng = derive_rng(seed, "true-value")
    x = model.sample_x(rng, test_size)
    arms = rule.evaluate(x)
    q = np.empty(test_size)
    for arm in model.coding.arms:
        mask = np.array([a == arm for a in arms])
        if np.any(mask):
            q[mask] = model.q0(x[mask], arm)
    return float(np.mean(q))
