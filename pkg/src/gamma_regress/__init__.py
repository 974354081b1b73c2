"""Robust regression by minimizing type 1 or type 2 gamma cross entropies."""

from .bench import ExperimentConfig, MseReport, compute_mse, emit_report, run_experiment
from .contamination import (
    ContaminationScheme,
    CovariateSpec,
    RegionRates,
    generate,
    generate_clean,
    nu_diagnostic,
    read_csv,
    write_csv,
)
from .divergence import (
    CovariateComponent,
    Kind,
    ModelOutlier,
    PointMass,
    Population,
    RegressionDataset,
    empirical_cross_entropy,
    empirical_objective,
    gamma_divergence,
    population_cross_entropy,
    self_cross_entropy,
    transform,
)
from .errors import GammaRegressError
from .estimator import FitConfig, FitResult, fit, fit_multistart
from .models import GaussianLinearModel, LogisticModel, PoissonModel, get_model
from .quadrature import QuadratureSpec
from .theory import check_pythagorean, check_theorem1, check_type2_bias

__version__ = "0.1.0"

__all__ = [
    "ContaminationScheme",
    "CovariateComponent",
    "CovariateSpec",
    "ExperimentConfig",
    "FitConfig",
    "FitResult",
    "GammaRegressError",
    "GaussianLinearModel",
    "Kind",
    "LogisticModel",
    "ModelOutlier",
    "MseReport",
    "PointMass",
    "PoissonModel",
    "Population",
    "QuadratureSpec",
    "RegionRates",
    "RegressionDataset",
    "check_pythagorean",
    "check_theorem1",
    "check_type2_bias",
    "compute_mse",
    "emit_report",
    "empirical_cross_entropy",
    "empirical_objective",
    "fit",
    "fit_multistart",
    "gamma_divergence",
    "generate",
    "generate_clean",
    "get_model",
    "nu_diagnostic",
    "population_cross_entropy",
    "read_csv",
    "run_experiment",
    "self_cross_entropy",
    "transform",
    "write_csv",
]
