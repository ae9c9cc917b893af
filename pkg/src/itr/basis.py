"""Design matrices: treatment codings, linear-interaction and Haar bases.

A design matrix splits into a main-effect block (functions of X only) and a
treatment block (each main-effect function times a mean-zero arm contrast),
so that the treatment block has conditional mean zero given X under the
randomization distribution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .data import TrialDataset
from .errors import InputError

MAIN = "main"
TREATMENT = "treatment"

_CODING_TOL = 1e-12


@dataclass(frozen=True)
class TreatmentCoding:
    """Arm identifiers with mean-zero contrast vectors and randomization
    probabilities (constant randomization)."""

    arms: tuple
    contrasts: np.ndarray  # (n_arms, K)
    arm_probabilities: np.ndarray  # (n_arms,)

    def __post_init__(self):
        arms = tuple(self.arms)
        contrasts = np.atleast_2d(np.asarray(self.contrasts, dtype=float))
        probs = np.asarray(self.arm_probabilities, dtype=float)
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "contrasts", contrasts)
        object.__setattr__(self, "arm_probabilities", probs)
        if len(arms) != contrasts.shape[0] or len(arms) != probs.shape[0]:
            raise InputError("arms, contrasts and probabilities must align")
        if len(set(arms)) != len(arms):
            raise InputError("duplicate arm identifiers")
        if np.any(probs <= 0) or abs(probs.sum() - 1.0) > _CODING_TOL:
            raise InputError("arm probabilities must be positive and sum to 1")
        centered = probs @ contrasts
        if np.max(np.abs(centered)) > _CODING_TOL:
            raise InputError(
                "probability-weighted contrast vectors must sum to zero"
            )
        for i in range(len(arms)):
            for j in range(i + 1, len(arms)):
                if np.array_equal(contrasts[i], contrasts[j]):
                    raise InputError("contrast vectors of distinct arms coincide")

    @property
    def n_contrasts(self) -> int:
        return self.contrasts.shape[1]

    def index_of(self, arm) -> int:
        try:
            return self.arms.index(arm)
        except ValueError:
            raise InputError(f"unknown arm identifier: {arm!r}") from None

    def arm_indices(self, arms: np.ndarray) -> np.ndarray:
        lookup = {a: i for i, a in enumerate(self.arms)}
        try:
            return np.array([lookup[a] for a in arms], dtype=np.intp)
        except KeyError as exc:
            raise InputError(f"unknown arm identifier: {exc.args[0]!r}") from None

    def to_dict(self) -> dict:
        return {
            "arms": list(self.arms),
            "contrasts": self.contrasts.tolist(),
            "probabilities": self.arm_probabilities.tolist(),
        }

    @staticmethod
    def from_dict(d: dict) -> "TreatmentCoding":
        return TreatmentCoding(tuple(d["arms"]), d["contrasts"], d["probabilities"])


def binary_coding() -> TreatmentCoding:
    """The default binary coding: arms {+1, -1} with probabilities 1/2."""
    return TreatmentCoding((1, -1), [[1.0], [-1.0]], [0.5, 0.5])


def load_coding_json(path) -> TreatmentCoding:
    with Path(path).open() as fh:
        return TreatmentCoding.from_dict(json.load(fh))


def default_wavelet_levels(n: int) -> int:
    """Deepest wavelet level for a sample of size n."""
    return math.floor(3 * math.log2(n) / 4) - 2


@dataclass(frozen=True)
class BasisSpec:
    kind: str = "linear-interaction"  # or "haar-wavelet"
    penalize_intercept: bool = False
    penalize_main_treatment: bool = True
    wavelet_level_rule: Callable[[int], int] = default_wavelet_levels

    def __post_init__(self):
        if self.kind not in ("linear-interaction", "haar-wavelet"):
            raise InputError(f"unknown basis kind: {self.kind!r}")


class LinearFeatures:
    """Covariate features (1, x_1, ..., x_p)."""

    def __init__(self, p: int):
        self.p = p
        self.names = ["1"] + [f"x{i + 1}" for i in range(p)]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.p:
            raise InputError(f"expected {self.p} covariates, got {x.shape[1]}")
        return np.hstack([np.ones((x.shape[0], 1)), x])

    def to_dict(self) -> dict:
        return {"kind": "linear", "p": self.p}


class HaarFeatures:
    """Haar features (h0, h_lk) on [0, 1] for a scalar covariate.

    h0(x) = 1 on [0,1]; h_lk(x) = 2^{l/2} (1{2^l x in [k+1/2, k+1)}
    - 1{2^l x in [k, k+1/2)}).  The k-range per level comes from the
    sample the basis was built on; out-of-range points evaluate to 0.
    """

    def __init__(self, levels: int, k_ranges: list[tuple[int, int]]):
        # k_ranges[l] = (k_min, k_max) inclusive for level l
        self.levels = levels
        self.k_ranges = [(int(a), int(b)) for a, b in k_ranges]
        self.index = [(l, k) for l in range(levels + 1)
                      for k in range(self.k_ranges[l][0], self.k_ranges[l][1] + 1)]
        self.names = ["h0"] + [f"h_{l}_{k}" for l, k in self.index]

    @staticmethod
    def from_sample(x: np.ndarray, levels: int) -> "HaarFeatures":
        x = np.asarray(x, dtype=float).ravel()
        ranges = []
        for l in range(levels + 1):
            scale = 2.0**l
            k_min = math.floor(scale * float(x.min()))
            k_max = math.ceil(scale * float(x.max())) - 1
            if k_max < k_min:
                k_max = k_min
            ranges.append((k_min, k_max))
        return HaarFeatures(levels, ranges)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != 1:
            raise InputError("Haar basis requires a single scalar covariate")
        xv = x[:, 0]
        out = np.empty((xv.shape[0], 1 + len(self.index)))
        out[:, 0] = 1.0
        for col, (l, k) in enumerate(self.index, start=1):
            y = np.ldexp(xv, l)  # 2^l x
            amp = 2.0 ** (l / 2.0)
            out[:, col] = amp * (
                ((y >= k + 0.5) & (y < k + 1.0)).astype(float)
                - ((y >= k) & (y < k + 0.5)).astype(float)
            )
        return out

    def to_dict(self) -> dict:
        return {"kind": "haar", "levels": self.levels,
                "k_ranges": [list(r) for r in self.k_ranges]}


def features_from_dict(d: dict):
    if d["kind"] == "linear":
        return LinearFeatures(d["p"])
    if d["kind"] == "haar":
        return HaarFeatures(d["levels"], [tuple(r) for r in d["k_ranges"]])
    raise InputError(f"unknown feature basis kind: {d['kind']!r}")


@dataclass(frozen=True)
class ColumnInfo:
    name: str
    group: str  # MAIN or TREATMENT
    penalized: bool
    sigma_hat: float
    feature_index: int
    contrast_index: int = -1  # -1 for main-effect columns


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray  # (n, J)
    columns: tuple[ColumnInfo, ...]
    feature_basis: object  # LinearFeatures | HaarFeatures
    coding: TreatmentCoding | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape[1] != len(self.columns) or values.shape[1] < 1:
            raise InputError("column metadata does not match matrix width")
        if not np.all(np.isfinite(values)):
            raise InputError("design matrix contains non-finite values")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    @property
    def sigma_hats(self) -> np.ndarray:
        return np.array([c.sigma_hat for c in self.columns])

    @property
    def penalized(self) -> np.ndarray:
        return np.array([c.penalized for c in self.columns], dtype=bool)

    @property
    def n_features(self) -> int:
        return len(self.feature_basis.names)

    def evaluate_rows(self, x: np.ndarray, arms: np.ndarray | None = None) -> np.ndarray:
        """Evaluate the same basis columns on new data, preserving column
        order; used for out-of-fold prediction."""
        feats = self.feature_basis.evaluate(x)
        if self.coding is None:
            return feats
        if arms is None:
            raise InputError("treatment design requires arm assignments")
        idx = self.coding.arm_indices(np.asarray(arms, dtype=object))
        contrast = self.coding.contrasts[idx]  # (n, K)
        blocks = [feats]
        for k in range(self.coding.n_contrasts):
            blocks.append(feats * contrast[:, [k]])
        return np.hstack(blocks)


def _assemble(feats: np.ndarray, feat_names: list[str], coding: TreatmentCoding | None,
              arm_idx: np.ndarray | None, spec: BasisSpec,
              basis_obj) -> DesignMatrix:
    m = feats.shape[1]
    blocks = [feats]
    columns: list[dict] = []
    for f in range(m):
        columns.append(dict(name=feat_names[f], group=MAIN,
                            penalized=spec.penalize_intercept if f == 0 else True,
                            feature_index=f, contrast_index=-1))
    if coding is not None:
        contrast = coding.contrasts[arm_idx]  # (n, K)
        for k in range(coding.n_contrasts):
            ck = contrast[:, [k]]
            blocks.append(feats * ck)
            suffix = f"c{k + 1}" if coding.n_contrasts > 1 else "a"
            for f in range(m):
                name = suffix if f == 0 else f"{feat_names[f]}*{suffix}"
                columns.append(dict(name=name, group=TREATMENT,
                                    penalized=spec.penalize_main_treatment if f == 0 else True,
                                    feature_index=f, contrast_index=k))
    values = np.hstack(blocks)
    sigma = np.sqrt(np.mean(values**2, axis=0))
    cols = tuple(ColumnInfo(sigma_hat=float(s), **c) for c, s in zip(columns, sigma))
    return DesignMatrix(values, cols, basis_obj, coding)


def build_linear_interaction_design(dataset: TrialDataset, coding: TreatmentCoding,
                                    spec: BasisSpec | None = None) -> DesignMatrix:
    """Columns (1, X, c, Xc) per contrast column c, in fixed order."""
    spec = spec or BasisSpec()
    arm_idx = coding.arm_indices(dataset.arms)
    basis = LinearFeatures(dataset.p)
    feats = basis.evaluate(dataset.x)
    return _assemble(feats, basis.names, coding, arm_idx, spec, basis)


def _haar_basis_for(dataset: TrialDataset, spec: BasisSpec) -> HaarFeatures:
    if dataset.p != 1:
        raise InputError("Haar basis requires a single scalar covariate")
    xv = dataset.x[:, 0]
    if np.any(xv < 0) or np.any(xv > 1):
        raise InputError("Haar basis requires covariates in [0, 1]")
    levels = spec.wavelet_level_rule(dataset.n)
    if levels < 0:
        raise InputError(f"sample size {dataset.n} too small for the wavelet level rule")
    return HaarFeatures.from_sample(xv, levels)


def build_haar_design(dataset: TrialDataset, coding: TreatmentCoding,
                      spec: BasisSpec | None = None) -> DesignMatrix:
    """Haar columns (h0, h_lk) and their products with each contrast column."""
    spec = spec or BasisSpec(kind="haar-wavelet")
    basis = _haar_basis_for(dataset, spec)
    arm_idx = coding.arm_indices(dataset.arms)
    feats = basis.evaluate(dataset.x)
    return _assemble(feats, basis.names, coding, arm_idx, spec, basis)


def build_design(dataset: TrialDataset, coding: TreatmentCoding,
                 spec: BasisSpec) -> DesignMatrix:
    if spec.kind == "haar-wavelet":
        return build_haar_design(dataset, coding, spec)
    return build_linear_interaction_design(dataset, coding, spec)


def build_covariate_design(dataset: TrialDataset, spec: BasisSpec) -> DesignMatrix:
    """Covariate-only design (no treatment block); used by prognosis
    prediction, which models E(R | X, A=a) per arm."""
    if spec.kind == "haar-wavelet":
        basis = _haar_basis_for(dataset, spec)
    else:
        basis = LinearFeatures(dataset.p)
    feats = basis.evaluate(dataset.x)
    return _assemble(feats, basis.names, None, None, spec, basis)
