"""Encrypted 1D-CNN inference and its plaintext training loop."""
from .activation import (
    SIGMOID_APPROX_COEFFS,
    ActivationSpec,
    approximation_bound,
    sigmoid_approx,
    sigmoid_approx_plain,
    sigmoid_derivative,
    sigmoid_true,
)
from .graph import (
    SENTINEL_VALUE,
    ComputeGraph,
    ForwardCache,
    LayerWeights,
    ModelWeights,
    Trace,
    TrainState,
    backward,
    conv1d_forward,
    dense_forward,
    forward,
    forward_plain,
    init_graph,
    mse,
    precheck,
    predictions_from_slots,
    reference_graph,
    sgd_update,
    slot_outputs_plain,
    train,
)
from .model_io import load_model, model_from_dict, model_to_dict, save_model

__all__ = [
    "SENTINEL_VALUE", "SIGMOID_APPROX_COEFFS", "ActivationSpec", "ComputeGraph", "ForwardCache",
    "LayerWeights", "ModelWeights", "Trace", "TrainState", "approximation_bound", "backward",
    "conv1d_forward", "dense_forward", "forward", "forward_plain", "init_graph", "load_model",
    "model_from_dict", "model_to_dict", "mse", "precheck", "predictions_from_slots",
    "reference_graph", "save_model", "sgd_update", "sigmoid_approx", "sigmoid_approx_plain",
    "sigmoid_derivative", "sigmoid_true", "slot_outputs_plain", "train",
]
