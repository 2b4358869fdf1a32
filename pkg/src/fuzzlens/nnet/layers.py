"""Batched layer primitives. All arrays are float64 with a leading batch
dimension; the heavy ones delegate to the selected kernel backend."""

from enum import Enum

import numpy as np

from .. import kernels


class BackwardRule(str, Enum):
    """How a ReLU treats the gradient flowing back through it."""

    STANDARD = "standard"
    POSITIVE_GRAD = "positive-grad-only"
    BOTH_MASKS = "both-masks"


def dense_forward(x, w, b=None):
    y = x @ w.T
    if b is not None:
        y = y + b
    return y


def dense_backward_input(dy, w):
    return dy @ w


def dense_backward_params(x, dy):
    return dy.T @ x, dy.sum(axis=0)


def relu_forward(x):
    return np.maximum(x, 0.0)


def relu_backward(pre, dy, rule):
    """`pre` is the forward pre-activation at this ReLU."""
    if rule == BackwardRule.STANDARD:
        return np.where(pre > 0, dy, 0.0)
    if rule == BackwardRule.POSITIVE_GRAD:
        # forward mask deliberately ignored
        return np.where(dy > 0, dy, 0.0)
    if rule == BackwardRule.BOTH_MASKS:
        return np.where((pre > 0) & (dy > 0), dy, 0.0)
    raise ValueError(f"unknown backward rule {rule!r}")


def flatten_forward(x):
    return x.reshape(x.shape[0], -1)


conv2d_forward = kernels.conv2d_forward
conv2d_backward_input = kernels.conv2d_backward_input
conv2d_backward_weights = kernels.conv2d_backward_weights
maxpool2d_forward = kernels.maxpool2d_forward
maxpool2d_backward = kernels.maxpool2d_backward
