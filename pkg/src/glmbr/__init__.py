"""glmbr: generalized linear models with bias-reducing adjusted-score IWLS.

Mean, median and mixed bias reduction alongside maximum likelihood and
explicit bias correction; Wald and adjusted-score inference; multinomial
logistic regression through a rescaled Poisson expansion; separation
detection; and a Monte-Carlo harness for estimator frequency properties.
"""

from .families import Family, Link
from .engine import (ModelSpec, FitControl, FitResult, FitError, METHODS,
                     fit, explicit_correction)
from .inference import (wald_interval, transform_exp, adjusted_score_statistic,
                        normal_intervals, ci_inclusion_check, quantile)
from .multinomial import (MultinomialProblem, MultinomialFit, fit_multinomial,
                          expand_to_poisson, rescale_means, change_baseline,
                          predicted_probs)
from .separation import SeparationReport, detect_separation

__version__ = "1.0.0"

__all__ = ["Family", "Link", "ModelSpec", "FitControl", "FitResult",
           "FitError", "METHODS", "fit", "explicit_correction",
           "wald_interval", "transform_exp", "adjusted_score_statistic",
           "normal_intervals", "ci_inclusion_check", "quantile",
           "MultinomialProblem", "MultinomialFit", "fit_multinomial",
           "expand_to_poisson", "rescale_means", "change_baseline",
           "predicted_probs", "SeparationReport", "detect_separation",
           "__version__"]
