"""Covariate adjustment for paired randomized experiments.

Estimate average treatment effects in pair-randomized designs by imputing
each pair's unobserved potential difference from the other pairs
(leave-one-pair-out), with an automatic interpolation between pair-aware
and pair-agnostic imputation models.
"""

from .dataset import (
    CsvSchema,
    PairedDataset,
    PairView,
    SyntheticExperiment,
    UnitRecord,
    load_csv,
    pair_views,
    realize,
)
from .errors import DataError, DegenerateAssignmentError, PloopError, RequestError
from .estimator import (
    EstimateResult,
    METHODS,
    estimate,
    estimate_all,
    fogarty_regression,
    ploop_estimate,
    simple_difference,
    variance_estimate,
)
from .imputation import (
    ImputationResult,
    impute_differences_directly,
    impute_outcomes_separately,
    interpolate,
)
from .predictors import BACKENDS, FittedModel, TrainingSet, fit, predict
from .simulation import (
    DgpConfig,
    EnumerationSummary,
    MethodSummary,
    SimulationSummary,
    enumerate_assignments,
    generate_experiment,
    monte_carlo,
)

__version__ = "0.1.0"

__all__ = [
    "BACKENDS",
    "CsvSchema",
    "DataError",
    "DegenerateAssignmentError",
    "DgpConfig",
    "EnumerationSummary",
    "EstimateResult",
    "FittedModel",
    "ImputationResult",
    "METHODS",
    "MethodSummary",
    "PairView",
    "PairedDataset",
    "PloopError",
    "RequestError",
    "SimulationSummary",
    "SyntheticExperiment",
    "TrainingSet",
    "UnitRecord",
    "enumerate_assignments",
    "estimate",
    "estimate_all",
    "fit",
    "fogarty_regression",
    "generate_experiment",
    "impute_differences_directly",
    "impute_outcomes_separately",
    "interpolate",
    "load_csv",
    "monte_carlo",
    "pair_views",
    "ploop_estimate",
    "predict",
    "realize",
    "simple_difference",
    "variance_estimate",
]
