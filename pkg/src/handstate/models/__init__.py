"""The five regression architectures with training and prediction machinery."""

from .api import (
    GradientCheckReport,
    StatefulPredictor,
    gradient_check,
    predict,
    predict_array,
    train,
)
from .baselines import train_dummy, train_linear
from .common import FEATURE_SUBSETS, TrainConfig, subset_columns
from .lstm import train_lstm
from .mlp import train_mlp
from .svr import fit_epsilon_svr, train_svr

__all__ = [
    "FEATURE_SUBSETS",
    "GradientCheckReport",
    "StatefulPredictor",
    "TrainConfig",
    "fit_epsilon_svr",
    "gradient_check",
    "predict",
    "predict_array",
    "subset_columns",
    "train",
    "train_dummy",
    "train_linear",
    "train_lstm",
    "train_mlp",
    "train_svr",
]
