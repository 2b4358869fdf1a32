"""Per-sample feature importance under five sources: the raw feature
values, three gradient flavours that differ only in how ReLUs treat the
backward flow, and epsilon-stabilised relevance propagation.

All of them look at the head only: from the winning-class logit down to
the feature layer, never back to pixels."""

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedLayerError
from .nnet import BackwardRule, backward_head, extract_features

METHODS = ("raw", "saliency", "deconvnet", "guided", "lrp")


@dataclass
class ImportanceVector:
    method: str
    values: np.ndarray
    target_class: int
    bias_absorbed: float | None = None  # lrp only: relevance taken by biases


@dataclass(frozen=True)
class LrpConfig:
    """epsilon stabilises near-zero denominators in the relevance rule."""

    epsilon: float = 1e-2

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def raw_importance(features, target_class=-1):
    """The feature values themselves, unchanged."""
    return ImportanceVector("raw", np.array(features, dtype=np.float64), int(target_class))


def saliency(model, trace):
    """Plain gradient of the winning logit w.r.t. the features."""
    m = trace.predicted_class
    return ImportanceVector("saliency", backward_head(model, trace, m, BackwardRule.STANDARD), m)


def deconvnet(model, trace):
    """ReLUs pass only positive upstream gradient, forward mask ignored."""
    m = trace.predicted_class
    return ImportanceVector(
        "deconvnet", backward_head(model, trace, m, BackwardRule.POSITIVE_GRAD), m
    )


def guided_backprop(model, trace):
    """ReLUs require positive pre-activation AND positive upstream gradient."""
    m = trace.predicted_class
    return ImportanceVector("guided", backward_head(model, trace, m, BackwardRule.BOTH_MASKS), m)


def lrp_epsilon(model, trace, cfg=LrpConfig()):
    """Relevance propagation with the epsilon rule over a dense/ReLU head.

    Starts from the raw winning logit (not the softmax probability) and
    redistributes it layer by layer: R_j = sum_k a_j w_kj / (z_k + eps *
    sign(z_k)) R_k, with sign(0) taken as +1. Relevance crosses a ReLU
    only where the unit was active. Also reports how much relevance the
    bias terms absorbed, since that is exactly the conservation gap."""

    head = range(model.feature_layer_index + 1, len(model.layers))
    for l in head:
        if model.layers[l].kind not in ("dense", "relu"):
            raise UnsupportedLayerError(
                f"relevance propagation supports dense/relu heads only; "
                f"layer {l} is {model.layers[l].kind!r}"
            )
    m = trace.predicted_class
    relevance = np.zeros(model.num_classes, dtype=np.float64)
    relevance[m] = trace.logits[m]
    bias_absorbed = 0.0
    for l in reversed(head):
        spec = model.layers[l]
        if spec.kind == "relu":
            relevance = np.where(trace.layer_inputs[l] > 0, relevance, 0.0)
            continue
        a = trace.layer_inputs[l]
        z = trace.layer_outputs[l]
        denom = z + cfg.epsilon * np.where(z >= 0, 1.0, -1.0)
        share = relevance / denom
        if spec.bias is not None:
            bias_absorbed += float((spec.bias * share).sum())
        relevance = a * (share @ spec.weights)
    return ImportanceVector("lrp", relevance, m, bias_absorbed=bias_absorbed)


def compute(method, model, trace, lrp=None):
    """Dispatch by method name; `lrp` is only consulted for 'lrp'."""
    if method == "raw":
        return raw_importance(extract_features(trace, model), trace.predicted_class)
    if method == "saliency":
        return saliency(model, trace)
    if method == "deconvnet":
        return deconvnet(model, trace)
    if method == "guided":
        return guided_backprop(model, trace)
    if method == "lrp":
        return lrp_epsilon(model, trace, lrp or LrpConfig())
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
