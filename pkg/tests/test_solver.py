import numpy as np
import pytest

from conftest import raw_design
from itr.basis import BasisSpec, binary_coding
from itr.data import TrialDataset
from itr.errors import InputError
from itr.solver import (
    FitConfig,
    default_lambda_grid,
    fit_ols,
    fit_prognosis_prediction,
    fit_weighted_lasso,
    lambda_max,
    lasso_path,
)

TIGHT = FitConfig(tolerance=1e-11)


def _objective(design, r, fit):
    resid = design.values @ fit.theta - r
    pen = design.penalized
    return float(np.mean(resid**2)
                 + fit.lam * np.sum(design.sigma_hats[pen] * np.abs(fit.theta[pen])))


class TestFitConfig:
    def test_validation(self):
        with pytest.raises(InputError):
            FitConfig(tolerance=0.0)
        with pytest.raises(InputError):
            FitConfig(max_sweeps=0)
        with pytest.raises(InputError):
            FitConfig(lambda_grid=(0.1, 0.2))
        FitConfig(lambda_grid=(0.2, 0.1, 0.0))


class TestFitWeightedLasso:
    def test_lambda_zero_matches_normal_equations(self, rng):
        values = rng.standard_normal((60, 8))
        r = rng.standard_normal(60)
        design = raw_design(values, penalized=[True] * 8)
        fit = fit_weighted_lasso(design, r, 0.0, TIGHT)
        oracle, *_ = np.linalg.lstsq(values, r, rcond=None)
        assert fit.converged
        assert np.max(np.abs(fit.theta - oracle)) < 1e-6

    def test_single_column_soft_threshold(self, rng):
        for lam in (0.0, 0.1, 0.5, 2.0):
            phi = rng.standard_normal((50, 1))
            r = rng.standard_normal(50)
            design = raw_design(phi, penalized=[True])
            fit = fit_weighted_lasso(design, r, lam, TIGHT)
            z = float(np.mean(phi[:, 0] * r))
            sig = design.sigma_hats[0]
            thr = 0.5 * lam * sig
            expected = np.sign(z) * max(abs(z) - thr, 0.0) / np.mean(phi[:, 0] ** 2)
            assert abs(fit.theta[0] - expected) < 1e-8

    def test_zero_response_gives_zero_penalized(self, rng):
        values = rng.standard_normal((30, 5))
        design = raw_design(values, penalized=[True] * 5)
        fit = fit_weighted_lasso(design, np.zeros(30), 0.3)
        assert np.all(fit.theta == 0.0)

    def test_zero_sigma_column_frozen(self, rng):
        values = np.column_stack([rng.standard_normal(20), np.zeros(20)])
        design = raw_design(values, penalized=[True, True])
        fit = fit_weighted_lasso(design, rng.standard_normal(20), 0.0)
        assert fit.theta[1] == 0.0

    def test_unpenalized_block_solved_exactly(self, rng):
        values = rng.standard_normal((80, 6))
        r = rng.standard_normal(80)
        design = raw_design(values, penalized=[False, False, True, True, True, True])
        fit = fit_weighted_lasso(design, r, 5.0, TIGHT)
        # huge lambda: penalized coefficients vanish, unpenalized solve LS
        assert np.all(fit.theta[2:] == 0.0)
        oracle, *_ = np.linalg.lstsq(values[:, :2], r, rcond=None)
        assert np.max(np.abs(fit.theta[:2] - oracle)) < 1e-9

    def test_objective_recomputable(self, rng):
        values = rng.standard_normal((40, 6))
        r = rng.standard_normal(40)
        design = raw_design(values, penalized=[True] * 6)
        fit = fit_weighted_lasso(design, r, 0.2)
        assert abs(fit.objective - _objective(design, r, fit)) < 1e-10 * (1 + fit.objective)
        assert fit.nonzero_count == int(np.count_nonzero(fit.theta))

    def test_non_finite_inputs_rejected(self, rng):
        design = raw_design(rng.standard_normal((10, 2)), [True, True])
        with pytest.raises(InputError):
            fit_weighted_lasso(design, np.full(10, np.nan), 0.1)
        with pytest.raises(InputError):
            fit_weighted_lasso(design, np.zeros(10), np.inf)
        with pytest.raises(InputError):
            fit_weighted_lasso(design, np.zeros(10), -0.1)

    def test_warm_start_shape_checked(self, rng):
        design = raw_design(rng.standard_normal((10, 3)), [True] * 3)
        with pytest.raises(InputError):
            fit_weighted_lasso(design, np.zeros(10), 0.1, warm_start=np.zeros(2))


class TestLambdaMax:
    def test_orthonormal_single_column(self):
        n = 64
        phi = np.ones((n, 1))
        r = np.full(n, 0.5)
        design = raw_design(phi, penalized=[True])
        lam_max = lambda_max(design, r)
        assert abs(lam_max - 1.0) < 1e-12
        at = fit_weighted_lasso(design, r, lam_max, TIGHT)
        below = fit_weighted_lasso(design, r, 0.99 * lam_max, TIGHT)
        assert at.theta[0] == 0.0
        assert below.theta[0] != 0.0

    def test_zero_response_degenerate(self, rng):
        design = raw_design(rng.standard_normal((20, 3)), [True] * 3)
        assert lambda_max(design, np.zeros(20)) == 0.0
        assert default_lambda_grid(0.0).tolist() == [0.0]

    def test_accounts_for_unpenalized_block(self, rng):
        values = rng.standard_normal((100, 4))
        r = values[:, 0] * 2.0 + 0.1 * rng.standard_normal(100)
        design = raw_design(values, penalized=[False, True, True, True])
        lam_max = lambda_max(design, r)
        fit = fit_weighted_lasso(design, r, lam_max, TIGHT)
        assert np.all(fit.theta[1:] == 0.0)
        fit_below = fit_weighted_lasso(design, r, lam_max * 0.98, TIGHT)
        assert np.any(fit_below.theta[1:] != 0.0)

    def test_no_penalized_columns_rejected(self, rng):
        design = raw_design(rng.standard_normal((10, 2)), [False, False])
        with pytest.raises(InputError):
            lambda_max(design, np.zeros(10))


class TestLassoPath:
    def test_default_grid_shape(self):
        grid = default_lambda_grid(2.0)
        assert grid.size == 101
        assert grid[0] == 2.0 and grid[-1] == 0.0
        assert np.all(np.diff(grid) < 0)

    def test_warm_vs_cold_objectives_agree(self, rng):
        values = rng.standard_normal((80, 10))
        r = values @ rng.standard_normal(10) + rng.standard_normal(80)
        design = raw_design(values, penalized=[False] + [True] * 9)
        grid = default_lambda_grid(lambda_max(design, r), size=20)
        path = lasso_path(design, r, grid)
        for lam, warm_fit in zip(grid, path):
            cold = fit_weighted_lasso(design, r, lam)
            rel = abs(warm_fit.objective - cold.objective) / (1 + abs(cold.objective))
            assert rel < 1e-8

    def test_sparsity_nonincreasing_in_lambda_at_endpoints(self, rng):
        values = rng.standard_normal((100, 8))
        r = values[:, 1] - values[:, 5] + 0.5 * rng.standard_normal(100)
        design = raw_design(values, penalized=[True] * 8)
        grid = default_lambda_grid(lambda_max(design, r), size=30)
        path = lasso_path(design, r, grid)
        assert path[0].nonzero_count == 0
        assert path[-1].nonzero_count == 8


class TestScaleEquivariance:
    def test_column_rescaling_preserves_predictions(self, rng):
        values = rng.standard_normal((60, 5))
        r = rng.standard_normal(60)
        design = raw_design(values, penalized=[True] * 5)
        fit = fit_weighted_lasso(design, r, 0.15, TIGHT)
        c = 3.7
        scaled = values.copy()
        scaled[:, 2] *= c
        design2 = raw_design(scaled, penalized=[True] * 5)
        fit2 = fit_weighted_lasso(design2, r, 0.15, TIGHT)
        assert abs(fit2.theta[2] - fit.theta[2] / c) < 1e-8
        assert np.max(np.abs(scaled @ fit2.theta - values @ fit.theta)) < 1e-8
        assert abs(fit2.objective - fit.objective) < 1e-8


class TestFitOLS:
    def test_orthogonal_columns(self, rng):
        n = 50
        q, _ = np.linalg.qr(rng.standard_normal((n, 4)))
        r = rng.standard_normal(n)
        design = raw_design(q, penalized=[True] * 4)
        fit = fit_ols(design, r)
        expected = q.T @ r  # orthonormal columns
        assert np.max(np.abs(fit.theta - expected)) < 1e-10

    def test_rank_deficient_minimum_norm(self, rng):
        base = rng.standard_normal((30, 3))
        dup = np.column_stack([base, base[:, 0]])
        r = rng.standard_normal(30)
        full = fit_ols(raw_design(base, [True] * 3), r)
        deficient = fit_ols(raw_design(dup, [True] * 4), r)
        assert np.max(np.abs(dup @ deficient.theta - base @ full.theta)) < 1e-8

    def test_single_observation_intercept(self):
        design = raw_design(np.ones((1, 1)), [False])
        fit = fit_ols(design, np.array([2.5]))
        assert fit.theta[0] == pytest.approx(2.5)


class TestPrognosisPrediction:
    def _constant_dataset(self):
        rng = np.random.default_rng(3)
        n = 60
        x = rng.uniform(-1, 1, size=(n, 2))
        arms = np.array([1, -1] * (n // 2), dtype=object)
        r = np.where([a == 1 for a in arms], 2.0, -1.0)
        return TrialDataset(x, arms, r.astype(float))

    def test_constant_responses_yield_intercept_fits(self):
        ds = self._constant_dataset()
        pfit = fit_prognosis_prediction(ds, binary_coding(), BasisSpec())
        for arm, expected in ((1, 2.0), (-1, -1.0)):
            theta = pfit.fits[arm].theta
            assert theta[0] == pytest.approx(expected, abs=1e-6)
            assert np.max(np.abs(theta[1:])) < 1e-6

    def test_per_arm_designs_use_covariate_basis(self):
        ds = self._constant_dataset()
        pfit = fit_prognosis_prediction(ds, binary_coding(), BasisSpec())
        for arm in (1, -1):
            assert pfit.designs[arm].n_columns == 3  # (1, x1, x2) = J/2
            assert pfit.designs[arm].n == 30
        assert set(pfit.chosen_lambdas) == {1, -1}

    def test_small_arm_rejected_by_name(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, size=(15, 1))
        arms = np.array([1] * 12 + [-1] * 3, dtype=object)
        ds = TrialDataset(x, arms, rng.standard_normal(15))
        with pytest.raises(InputError, match="-1"):
            fit_prognosis_prediction(ds, binary_coding(), BasisSpec())


class TestKKTBattery:
    def test_random_problems_satisfy_kkt(self):
        rng = np.random.default_rng(2024)
        for case in range(60):
            J = int(rng.integers(2, 51))
            n = int(rng.integers(max(2 * J, 60), 201))
            values = rng.standard_normal((n, J))
            beta = rng.standard_normal(J) * (rng.random(J) < 0.4)
            r = values @ beta + rng.standard_normal(n)
            penalized = rng.random(J) < 0.8
            if not penalized.any():
                penalized[0] = True
            design = raw_design(values, penalized)
            lam_max = lambda_max(design, r)
            lam = float(rng.uniform(0, 1.2) * lam_max)
            fit = fit_weighted_lasso(design, r, lam)
            assert fit.converged
            assert fit.kkt_max_violation <= 1e-5
            if lam >= lam_max:
                assert np.all(fit.theta[design.penalized] == 0.0)
