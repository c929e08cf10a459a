"""Additive-model smoothing-spline imputation for survey nonresponse.

The package covers the full pipeline of a design-based imputation study:
finite populations (synthetic or CSV), SRSWOR and stratified sampling
with design weights, logistic nonresponse, four imputation methods
(weighted mean, weighted regression, nearest neighbor, additive model
with GCV-tuned penalized splines), two bootstrap variance procedures for
the imputed total, Monte Carlo comparison measures, and a reproducible
experiment runner with a CLI.
"""

from .am import AdditiveModelRegressor, AMFit, SmootherSettings, fit_am, predict_am
from .bootstrap import (
    BootstrapVariance,
    bwo_variance,
    confidence_interval,
    mmb_variance,
)
from .config import ExperimentConfig, load_config, save_config, validate_config
from .exceptions import (
    AmimputeError,
    ConfigError,
    CsvFormatError,
    DataError,
    DegenerateBasisError,
    DegenerateFitError,
    NoRespondentsError,
    NumericalError,
)
from .imputation import (
    ImputedDataset,
    impute_am,
    impute_arrays,
    impute_mean,
    impute_nearest_neighbor,
    impute_regression,
    imputed_total,
    make_impute_fn,
)
from .metrics import (
    BootstrapAccuracy,
    Measures,
    MethodResults,
    SimulationResult,
    bootstrap_summary,
    compute_measures,
    mrpe,
    rank_methods,
    rb,
    rrmse,
    rrvar,
)
from .population import (
    Population,
    generate_synthetic,
    load_csv,
    mean_response,
    population_total,
    save_csv,
)
from .response import (
    LogisticResponseModel,
    ResponseSet,
    calibrate_intercept,
    draw_response,
)
from .runner import ExperimentResult, run_experiment, run_single_replicate
from .sampling import (
    Sample,
    StrataAssignment,
    horvitz_thompson,
    save_sample_csv,
    srswor,
    stratified_sample,
    stratify_by_medians,
)
from .spline import (
    SmoothingSpline,
    SplineBasis,
    SplineFit,
    build_basis,
    fit_pls,
    gcv_select,
    predict_spline,
)

__version__ = "0.1.0"

__all__ = [
    "AMFit",
    "AdditiveModelRegressor",
    "AmimputeError",
    "BootstrapAccuracy",
    "BootstrapVariance",
    "ConfigError",
    "CsvFormatError",
    "DataError",
    "DegenerateBasisError",
    "DegenerateFitError",
    "ExperimentConfig",
    "ExperimentResult",
    "ImputedDataset",
    "LogisticResponseModel",
    "Measures",
    "MethodResults",
    "NoRespondentsError",
    "NumericalError",
    "Population",
    "ResponseSet",
    "Sample",
    "SimulationResult",
    "SmootherSettings",
    "SmoothingSpline",
    "SplineBasis",
    "SplineFit",
    "StrataAssignment",
    "bootstrap_summary",
    "build_basis",
    "bwo_variance",
    "calibrate_intercept",
    "compute_measures",
    "confidence_interval",
    "draw_response",
    "fit_am",
    "fit_pls",
    "gcv_select",
    "generate_synthetic",
    "horvitz_thompson",
    "impute_am",
    "impute_arrays",
    "impute_mean",
    "impute_nearest_neighbor",
    "impute_regression",
    "imputed_total",
    "load_config",
    "load_csv",
    "make_impute_fn",
    "mean_response",
    "mmb_variance",
    "mrpe",
    "population_total",
    "predict_am",
    "predict_spline",
    "rank_methods",
    "rb",
    "rrmse",
    "rrvar",
    "run_experiment",
    "run_single_replicate",
    "save_config",
    "save_csv",
    "save_sample_csv",
    "srswor",
    "stratified_sample",
    "stratify_by_medians",
    "validate_config",
]
