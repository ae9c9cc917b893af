"""Trial datasets and their CSV interchange format.

A dataset CSV has a header row with columns ``x1..xp``, ``arm`` (string or
integer identifier) and ``r`` (real response), plus an optional ``prob``
column carrying per-row randomization probabilities.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError


def _parse_arm(token: str):
    try:
        return int(token)
    except ValueError:
        return token


@dataclass(frozen=True)
class TrialDataset:
    """Per-subject records from a randomized trial.

    ``propensity`` holds the known randomization probabilities p(A_i | X_i);
    when ``None`` they are taken from the treatment coding in use.
    """

    x: np.ndarray  # (n, p) pretreatment covariates
    arms: np.ndarray  # (n,) assigned arm identifiers
    r: np.ndarray  # (n,) responses
    propensity: np.ndarray | None = None  # (n,) randomization probabilities

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        r = np.asarray(self.r, dtype=float)
        arms = np.asarray(self.arms, dtype=object)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "arms", arms)
        if x.shape[0] != r.shape[0] or arms.shape[0] != r.shape[0]:
            raise InputError("x, arms and r must have the same number of rows")
        if x.shape[0] == 0:
            raise InputError("dataset is empty")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(r)):
            raise InputError("non-finite covariate or response values")
        if self.propensity is not None:
            prob = np.asarray(self.propensity, dtype=float)
            object.__setattr__(self, "propensity", prob)
            if prob.shape[0] != r.shape[0]:
                raise InputError("propensity length mismatch")
            if not np.all(np.isfinite(prob)) or np.any(prob <= 0):
                raise InputError("propensities must be strictly positive")

    @property
    def n(self) -> int:
        return self.r.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "TrialDataset":
        prob = None if self.propensity is None else self.propensity[idx]
        return TrialDataset(self.x[idx], self.arms[idx], self.r[idx], prob)


def load_dataset_csv(path) -> TrialDataset:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        x_cols = [h for h in header if h.startswith("x")]
        expected = [f"x{i + 1}" for i in range(len(x_cols))]
        if x_cols != expected or "arm" not in header or "r" not in header:
            raise InputError(
                f"{path}: header must be x1..xp,arm,r[,prob]; got {header}"
            )
        xi = [header.index(c) for c in x_cols]
        ai = header.index("arm")
        ri = header.index("r")
        pi = header.index("prob") if "prob" in header else None

        xs, arms, rs, probs = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                xs.append([float(row[i]) for i in xi])
                rs.append(float(row[ri]))
                if pi is not None:
                    probs.append(float(row[pi]))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: non-numeric field ({exc})") from None
            arms.append(_parse_arm(row[ai].strip()))
    if not rs:
        raise InputError(f"{path}: no data rows")
    prob = np.asarray(probs) if pi is not None else None
    return TrialDataset(np.asarray(xs), np.asarray(arms, dtype=object), np.asarray(rs), prob)


def save_dataset_csv(dataset: TrialDataset, path, include_prob: bool = False) -> None:
    path = Path(path)
    header = [f"x{i + 1}" for i in range(dataset.p)] + ["arm", "r"]
    if include_prob:
        if dataset.propensity is None:
            raise InputError("dataset has no propensities to write")
        header.append("prob")
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.x[i]]
            row.append(str(dataset.arms[i]))
            row.append(repr(float(dataset.r[i])))
            if include_prob:
                row.append(repr(float(dataset.propensity[i])))
            writer.writerow(row)
