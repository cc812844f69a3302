"""Heterogeneous treatment-effect estimation with bagged hinge bases and
grouped shrinkage."""

from .archive import load_model, save_model
from .baselines import BaggedCausalMars, CausalMars, causal_forward
from .basis import CONSTANT, BasisCollection, BasisFunction, HingeTerm
from .bench import BenchConfig, BenchResult, run_bench, write_results
from .data import Dataset
from .dataio import load_dataset_csv, load_features_csv
from .estimators import (
    ESTIMATOR_NAMES,
    ScbmRegressor,
    TransformedOutcomeBaggingMars,
    make_estimator,
)
from .exceptions import (
    ArchiveError,
    ArchiveVersionError,
    ConvergenceError,
    CsvFormatError,
    UnsupportedModelError,
)
from .forward import ForwardConfig, ForwardFit, forward_pass
from .group_lasso import (
    GroupedDesign,
    GroupLassoSolution,
    build_grouped_design,
    build_singleton_design,
    cv_lambda,
    lambda_max,
    solve,
)
from .interpret import (
    CalibrationResult,
    ImportanceResult,
    PdpResult,
    partial_dependence,
    subgroup_calibration,
    variable_importance,
)
from .propensity import (
    ConstantPropensity,
    ForestPropensity,
    LogisticPropensity,
    TransformedOutcome,
    fit_propensity,
    transform_outcome,
)
from .simulate import SCENARIOS, SimDraw, draw_scenario, mu_tau, propensity_fn

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ArchiveError",
    "ArchiveVersionError",
    "BaggedCausalMars",
    "BasisCollection",
    "BasisFunction",
    "BenchConfig",
    "BenchResult",
    "CONSTANT",
    "CalibrationResult",
    "CausalMars",
    "ConstantPropensity",
    "ConvergenceError",
    "CsvFormatError",
    "Dataset",
    "ESTIMATOR_NAMES",
    "ForestPropensity",
    "ForwardConfig",
    "ForwardFit",
    "GroupLassoSolution",
    "GroupedDesign",
    "HingeTerm",
    "ImportanceResult",
    "LogisticPropensity",
    "PdpResult",
    "SCENARIOS",
    "ScbmRegressor",
    "SimDraw",
    "TransformedOutcome",
    "TransformedOutcomeBaggingMars",
    "UnsupportedModelError",
    "build_grouped_design",
    "build_singleton_design",
    "causal_forward",
    "cv_lambda",
    "draw_scenario",
    "fit_propensity",
    "forward_pass",
    "lambda_max",
    "load_dataset_csv",
    "load_features_csv",
    "load_model",
    "make_estimator",
    "mu_tau",
    "partial_dependence",
    "propensity_fn",
    "run_bench",
    "save_model",
    "solve",
    "subgroup_calibration",
    "transform_outcome",
    "variable_importance",
    "write_results",
]
