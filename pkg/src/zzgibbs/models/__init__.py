from .bounds import (
    EnvelopeOverflowError,
    GaussianProductBoundTable,
    PoissonScoreBoundTable,
    golden_section_max,
    poisson_score_power_bound,
    poisson_score_power_sup,
    regression_scale_bound_reference,
)
from .copula import GaussianCopulaModel, copula_pseudo_obs, correlation, correlation_slope
from .poisson import PoissonRegressionModel
from .regression import GaussianRegressionModel, box_muller_response

__all__ = [
    "EnvelopeOverflowError",
    "GaussianProductBoundTable",
    "PoissonScoreBoundTable",
    "golden_section_max",
    "poisson_score_power_bound",
    "poisson_score_power_sup",
    "regression_scale_bound_reference",
    "GaussianCopulaModel",
    "copula_pseudo_obs",
    "correlation",
    "correlation_slope",
    "PoissonRegressionModel",
    "GaussianRegressionModel",
    "box_muller_response",
]
