import numpy as np
import pytest

from itr.basis import BasisSpec, binary_coding, build_linear_interaction_design
from itr.data import TrialDataset
from itr.errors import InputError
from itr.policy import (
    ConstantRule,
    TreatmentRule,
    derive_rule,
    estimate_value,
    evaluate_true_value,
    load_rule_json,
    prediction_error,
    save_rule_json,
)
from itr.simulation import toy_model
from itr.solver import fit_ols
from itr.basis import LinearFeatures


def _linear_rule(theta_a, theta_xa):
    """Binary-arm rule sign(theta_a + theta_xa * x) on one covariate."""
    return TreatmentRule(binary_coding(), LinearFeatures(1),
                         np.array([[theta_a], [theta_xa]]))


class TestTreatmentRule:
    def test_sign_rule(self):
        rule = _linear_rule(0.5, -1.0)
        x = np.array([[0.0], [0.4], [0.6]])
        assert list(rule.evaluate(x)) == [1, 1, -1]

    def test_all_zero_coefficients_take_first_arm(self):
        rule = _linear_rule(0.0, 0.0)
        assert list(rule.evaluate(np.array([[0.3], [-0.8]]))) == [1, 1]

    def test_toy_population_rule_threshold(self):
        # theta = (4/9, -2/3) recommends +1 exactly when x < 2/3
        rule = _linear_rule(4 / 9, -2 / 3)
        x = np.array([[0.6], [0.7], [-1.0]])
        assert list(rule.evaluate(x)) == [1, -1, 1]

    def test_positive_scaling_invariance(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, size=(200, 1))
        base = _linear_rule(0.37, -0.91)
        for c in (0.1, 1.0, 7.0):
            scaled = _linear_rule(0.37 * c, -0.91 * c)
            assert np.array_equal(scaled.evaluate(x), base.evaluate(x))

    def test_variable_count(self):
        assert _linear_rule(0.5, 0.0).variable_count() == 1
        assert _linear_rule(0.5, -1.0).variable_count() == 2
        assert _linear_rule(0.0, 0.0).variable_count() == 0

    def test_tie_break_must_cover_arms(self):
        with pytest.raises(InputError):
            TreatmentRule(binary_coding(), LinearFeatures(1),
                          np.zeros((2, 1)), tie_break=(1, 2))

    def test_json_roundtrip(self, tmp_path):
        rule = _linear_rule(4 / 9, -2 / 3)
        path = tmp_path / "rule.json"
        save_rule_json(rule, path)
        back = load_rule_json(path)
        x = np.linspace(-1, 1, 101)[:, None]
        assert np.array_equal(back.evaluate(x), rule.evaluate(x))
        assert back.variable_count() == rule.variable_count()


class TestDeriveRule:
    def test_extracts_treatment_block(self):
        rng = np.random.default_rng(1)
        ds = TrialDataset(rng.uniform(-1, 1, size=(50, 2)),
                          np.array(rng.choice([1, -1], 50), dtype=object),
                          rng.standard_normal(50))
        design = build_linear_interaction_design(ds, binary_coding(), BasisSpec())
        fit = fit_ols(design, ds.r)
        rule = derive_rule(fit, design)
        by_col = {c.name: fit.theta[j] for j, c in enumerate(design.columns)}
        expected = np.array([[by_col["a"]], [by_col["x1*a"]], [by_col["x2*a"]]])
        assert np.array_equal(rule.treatment_coefficients, expected)

    def test_length_mismatch_rejected(self):
        rng = np.random.default_rng(1)
        ds = TrialDataset(rng.uniform(-1, 1, size=(20, 1)),
                          np.array(rng.choice([1, -1], 20), dtype=object),
                          rng.standard_normal(20))
        design = build_linear_interaction_design(ds, binary_coding(), BasisSpec())
        fit = fit_ols(design, ds.r)
        bad = type(fit)(theta=fit.theta[:-1], lam=0.0, objective=0.0,
                        kkt_max_violation=0.0, nonzero_count=0, converged=True)
        with pytest.raises(InputError):
            derive_rule(bad, design)


class TestEstimateValue:
    def test_weights_collapse_when_rule_matches_everything(self):
        ds = TrialDataset(np.zeros((4, 1)), np.array([1, 1, 1, 1], dtype=object),
                          np.array([1.0, 2.0, 3.0, 4.0]),
                          np.ones(4))
        est = estimate_value(ConstantRule(binary_coding(), 1), ds)
        assert est.value == pytest.approx(2.5)
        assert est.matched_count == 4

    def test_hand_computed_ipw(self):
        coding = binary_coding()
        ds = TrialDataset(np.zeros((2, 1)), np.array([1, -1], dtype=object),
                          np.array([2.0, 0.0]), np.array([0.5, 0.5]))
        est = estimate_value(ConstantRule(coding, 1), ds)
        assert est.numerator == pytest.approx(2.0)
        assert est.denominator == pytest.approx(1.0)
        assert est.value == pytest.approx(2.0)

    def test_empty_match_undefined(self):
        ds = TrialDataset(np.zeros((3, 1)), np.array([-1, -1, -1], dtype=object),
                          np.ones(3), np.full(3, 0.5))
        est = estimate_value(ConstantRule(binary_coding(), 1), ds)
        assert est.value is None
        assert est.matched_count == 0

    def test_propensities_from_coding_when_absent(self):
        ds = TrialDataset(np.zeros((2, 1)), np.array([1, -1], dtype=object),
                          np.array([2.0, 0.0]))
        est = estimate_value(ConstantRule(binary_coding(), 1), ds)
        assert est.value == pytest.approx(2.0)


class TestPredictionError:
    def test_perfect_fit_and_zero_theta(self):
        rng = np.random.default_rng(5)
        ds = TrialDataset(rng.uniform(-1, 1, size=(30, 1)),
                          np.array(rng.choice([1, -1], 30), dtype=object),
                          rng.standard_normal(30))
        design = build_linear_interaction_design(ds, binary_coding(), BasisSpec())
        fit = fit_ols(design, design.values @ np.arange(4.0))
        assert prediction_error(fit, design, design.values @ np.arange(4.0)) \
            == pytest.approx(0.0, abs=1e-16)
        zero = type(fit)(theta=np.zeros(4), lam=0.0, objective=0.0,
                         kkt_max_violation=0.0, nonzero_count=0, converged=True)
        assert prediction_error(zero, design, ds.r) == pytest.approx(np.mean(ds.r**2))

    def test_toy_population_loss_gap(self):
        # E(1/3 - X^2)^2 = 4/45 under X ~ U[-1, 1]
        x = np.linspace(-1, 1, 2_000_001)
        assert np.mean((1 / 3 - x**2) ** 2) == pytest.approx(4 / 45, abs=1e-6)


class TestEvaluateTrueValue:
    def test_toy_values(self):
        model = toy_model()
        always = ConstantRule(model.coding, 1)
        assert evaluate_true_value(always, model, 100_000, 0) \
            == pytest.approx(4 / 9, abs=0.01)
        best_in_class = _linear_rule(4 / 9, -2 / 3)
        assert evaluate_true_value(best_in_class, model, 100_000, 0) \
            == pytest.approx(29 / 81, abs=0.01)

    def test_optimal_rule_dominates_candidates(self):
        model = toy_model()

        class OptimalRule:
            coding = model.coding

            def evaluate(self, x):
                return model.optimal_rule(x)

        v_opt = evaluate_true_value(OptimalRule(), model, 100_000, 7)
        candidates = [ConstantRule(model.coding, 1),
                      ConstantRule(model.coding, -1),
                      _linear_rule(4 / 9, -2 / 3),
                      _linear_rule(-1.0, 0.3)]
        for rule in candidates:
            assert evaluate_true_value(rule, model, 100_000, 7) <= v_opt + 1e-12
