"""Individualized treatment rules via weighted l1-penalized least squares."""

from .basis import (
    BasisSpec,
    DesignMatrix,
    TreatmentCoding,
    binary_coding,
    build_haar_design,
    build_linear_interaction_design,
)
from .data import TrialDataset, load_dataset_csv, save_dataset_csv
from .errors import InputError, ItrError, NumericError
from .policy import (
    TreatmentRule,
    ValueEstimate,
    derive_rule,
    estimate_value,
    evaluate_true_value,
    prediction_error,
)
from .solver import (
    CoefficientFit,
    FitConfig,
    fit_ols,
    fit_prognosis_prediction,
    fit_weighted_lasso,
    lambda_max,
)
from .simulation import (
    BenchmarkScenario,
    GenerativeModel,
    cohens_d,
    example_model,
    generate_example,
    optimal_value,
    run_benchmark,
    toy_model,
)
from .tuning import TuningReport, cv_partition, select_lambda
from .bounds import (
    BoundAudit,
    MarginEstimate,
    audit_hard_margin_bound,
    audit_theorem_bound,
    estimate_margin_constants,
    margin_quantities,
)

__version__ = "0.1.0"
