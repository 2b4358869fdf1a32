"""Minimal feedforward network engine: dense / conv2d / maxpool / relu /
flatten layers, a forward pass with full trace, an SGD trainer, and a
rule-parameterized backward pass reused by the attribution methods."""

from .layers import BackwardRule
from .model import (
    ForwardTrace,
    LayerSpec,
    Model,
    backward_head,
    desk_model,
    extract_features,
    forward,
    layer_shapes,
    softmax,
    validate,
)
from .serialize import load_model, save_model
from .train import TrainConfig, TrainReport, accuracy, predict, train

__all__ = [
    "BackwardRule",
    "ForwardTrace",
    "LayerSpec",
    "Model",
    "TrainConfig",
    "TrainReport",
    "accuracy",
    "backward_head",
    "desk_model",
    "extract_features",
    "forward",
    "layer_shapes",
    "load_model",
    "predict",
    "save_model",
    "softmax",
    "train",
    "validate",
]
