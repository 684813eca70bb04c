"""Match-outcome prediction with statistically enhanced covariates.

Elo ratings and age transforms are added to conventional ranking
covariates and compared across linear logistic, P-spline additive and
random-forest learners under chronological validation schemes.
"""

__version__ = "0.1.0"

from .dataset import Dataset, MatchRecord, generate_synthetic, parse_matches, serialize_matches
from .evaluation import (
    EvaluationReport,
    Scores,
    brier_score,
    classification_rate,
    expanding_window,
    loto_cv,
    predictive_likelihood,
    render_report,
    rolling_window,
    run_validation,
)
from .features import (
    EloTable,
    FeatureName,
    Learner,
    ModelSpec,
    annotate_pre_match_elo,
    build_design,
    enumerate_specs,
)
from .forest import fit_forest, tune_mtry
from .glm_linear import coefficient_report, fit_logistic
from .glm_spline import effect_curve, fit_pspline_gam

__all__ = [
    "Dataset", "MatchRecord", "generate_synthetic", "parse_matches", "serialize_matches",
    "EvaluationReport", "Scores", "brier_score", "classification_rate", "expanding_window",
    "loto_cv", "predictive_likelihood", "render_report", "rolling_window", "run_validation",
    "EloTable", "FeatureName", "Learner", "ModelSpec", "annotate_pre_match_elo",
    "build_design", "enumerate_specs", "fit_forest", "tune_mtry", "coefficient_report",
    "fit_logistic", "effect_curve", "fit_pspline_gam",
]
