from .identify import TrainConfig, TrainResult, fit_network, fit_physical, train_blackbox, train_residual
from .models import (BlackBoxModel, InverseModel, PgnnModel, PhysicalModel, load_model, model_from_json,
                     model_to_json, save_model)
from .nn import Adam, NNParams, mse_and_gradient, nn_forward, nn_gradient
from .regressors import (RegressorSet, RegressorSpec, build_regressors, delta, delta2, input_transform,
                         regressors_from_trace, rotation_mask)

__all__ = [
    "Adam", "BlackBoxModel", "InverseModel", "NNParams", "PgnnModel", "PhysicalModel", "RegressorSet",
    "RegressorSpec", "TrainConfig", "TrainResult", "build_regressors", "delta", "delta2", "fit_network",
    "fit_physical", "input_transform", "load_model", "model_from_json", "model_to_json", "mse_and_gradient",
    "nn_forward", "nn_gradient", "regressors_from_trace", "rotation_mask", "save_model", "train_blackbox",
    "train_residual",
]
