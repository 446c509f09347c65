"""Lookahead-regularized learning: accurate predictors that also induce good decisions.

A predictive model is trained jointly with a decision model (one masked
gradient step by each user), a propensity model correcting for the induced
covariate shift, and an interval model certifying outcome improvement at a
chosen confidence level.
"""

from .data import (
    Dataset,
    FeatureMask,
    Scaler,
    SplitSpec,
    TrainConfig,
    config_from_json,
    generate_synthetic,
    load_csv,
    split,
    standardize,
    synthetic_truth,
)
from .decision import DecisionOutcome, decide, ddecided_dparams
from .evaluation import (
    EvalReport,
    FrontierError,
    FrontierPoint,
    Oracle,
    evaluate,
    fit_oracle,
    frontier_sweep,
    synthetic_oracle,
)
from .models import (
    PredictiveModel,
    PropensityModel,
    TrainingDivergedError,
    fit_pinball,
    fit_predictive,
    fit_propensity,
    pinball_loss,
)
from .training import (
    RoundTrace,
    TrainedBundle,
    grad_lookahead,
    grad_naive,
    lookahead_objective,
    lookahead_penalty,
    naive_objective,
    train_lookahead,
    train_naive,
)
from .uncertainty import (
    IntervalModel,
    effective_sample_size,
    fit_quantile,
    fit_residual_bootstrap,
    fit_vanilla_bootstrap,
    two_sided_z,
)

__version__ = "0.1.0"
