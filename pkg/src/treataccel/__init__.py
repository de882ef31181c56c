"""Continuous-time marginal structural models for treatment acceleration.

Fit the observational treatment intensity with an additive hazards model,
convert a hypothetical multiplicative change of that intensity into
subject-level likelihood-ratio weights, and estimate the survival curve
that would have been observed under the changed treatment rate. A built-in
mechanism simulator provides ground-truth cohorts for end-to-end checks.
"""

from ._backend import backend_name
from .acceleration import AccelFactor, AccelerationSpec, parse_accel_spec
from .aalen import (CumulativeCoefficients, DesignSpec, ResidualMeans,
                    fit_aalen, martingale_residuals, predict_cum_intensity,
                    residual_group_means)
from .cohort import (CENSOR, COVARIATE, OUTCOME, TREATMENT, Cohort,
                     CovariateSchema, Event, ParseError, SubjectPath,
                     parse_cohort, pooled_event_times, read_cohort,
                     write_cohort)
from .estimators import (CumulativeHazard, SurvivalCurve, ZeroDenominator,
                         bootstrap_ci, estimate_survival, ratio_matrix,
                         survival_from_cumhaz, weighted_nelson_aalen)
from .simulate import (DgpConfig, aalen_recovery_config, default_config,
                       oracle_survival, simulate_cohort,
                       simulate_hypothetical)
from .stepfun import StepFunction
from .timechange import (IntensityCheck, TimeChange, gamma_from_rate,
                         gamma_inverse, mc_check_intensity, shift_path)
from .weights import (DEFAULT_FLOOR, LikelihoodRatioPath, WeightSummary,
                      likelihood_ratio_path, weight_diagnostics)

__version__ = "0.1.0"

__all__ = [
    "AccelFactor", "AccelerationSpec", "parse_accel_spec",
    "CumulativeCoefficients", "DesignSpec", "ResidualMeans", "fit_aalen",
    "martingale_residuals", "predict_cum_intensity", "residual_group_means",
    "CENSOR", "COVARIATE", "OUTCOME", "TREATMENT", "Cohort",
    "CovariateSchema", "Event", "ParseError", "SubjectPath", "parse_cohort",
    "pooled_event_times", "read_cohort", "write_cohort",
    "CumulativeHazard", "SurvivalCurve", "ZeroDenominator", "bootstrap_ci",
    "estimate_survival", "ratio_matrix", "survival_from_cumhaz",
    "weighted_nelson_aalen",
    "DgpConfig", "aalen_recovery_config", "default_config",
    "oracle_survival", "simulate_cohort", "simulate_hypothetical",
    "StepFunction",
    "IntensityCheck", "TimeChange", "gamma_from_rate", "gamma_inverse",
    "mc_check_intensity", "shift_path",
    "DEFAULT_FLOOR", "LikelihoodRatioPath", "WeightSummary",
    "likelihood_ratio_path", "weight_diagnostics",
    "backend_name", "__version__",
]
