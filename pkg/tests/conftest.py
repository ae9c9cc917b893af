"""Shared fixtures: hand-built designs and fully known generative models."""

import numpy as np
import pytest

from itr.basis import ColumnInfo, DesignMatrix, LinearFeatures, binary_coding
from itr.simulation import GenerativeModel


def raw_design(values: np.ndarray, penalized) -> DesignMatrix:
    """Wrap a plain matrix as a DesignMatrix with correct sigma_hat metadata."""
    values = np.asarray(values, dtype=float)
    sigma = np.sqrt(np.mean(values**2, axis=0))
    cols = tuple(
        ColumnInfo(name=f"c{j}", group="main", penalized=bool(penalized[j]),
                   sigma_hat=float(sigma[j]), feature_index=j)
        for j in range(values.shape[1])
    )
    return DesignMatrix(values, cols, LinearFeatures(values.shape[1] - 1), None)


def xa_model() -> GenerativeModel:
    """X ~ U[-1,1], Q0(X, A) = X * A; margin is 2|X|."""

    def q0(x, arm):
        xv = np.atleast_2d(np.asarray(x, dtype=float))[:, 0]
        return xv * float(arm)

    def sample_x(rng, n):
        return rng.uniform(-1.0, 1.0, size=(n, 1))

    return GenerativeModel("xa", binary_coding(), sample_x, q0)


def two_point_model(delta: float = 0.3) -> GenerativeModel:
    """X ∈ {0, 1} equally likely, Q0(X, A) = delta * A * (2X - 1).

    The margin equals 2*delta at every x (strictly separated arm effects).
    """

    def q0(x, arm):
        xv = np.atleast_2d(np.asarray(x, dtype=float))[:, 0]
        return delta * float(arm) * (2.0 * xv - 1.0)

    def sample_x(rng, n):
        return rng.integers(0, 2, size=(n, 1)).astype(float)

    return GenerativeModel("two-point", binary_coding(), sample_x, q0,
                           optimal_value=delta)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)
