"""Model definition, forward pass and the rule-parameterized backward pass
from one output logit down to the feature layer."""

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ModelSpecError, ShapeError
from . import layers
from .layers import BackwardRule

LAYER_KINDS = ("dense", "conv2d", "maxpool", "relu", "flatten")


@dataclass
class LayerSpec:
    kind: str
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None
    kernel_size: int | None = None
    stride: int | None = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ModelSpecError(f"unknown layer kind {self.kind!r}")
        if self.weights is not None:
            self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.bias is not None:
            self.bias = np.ascontiguousarray(self.bias, dtype=np.float64)


@dataclass
class Model:
    """Ordered layer chain plus the bookkeeping the explainer needs:
    which layer emits the feature vector (length feature_dim) and how many
    classes the final layer scores."""

    layers: list[LayerSpec]
    input_shape: tuple[int, ...]
    feature_layer_index: int
    num_classes: int
    feature_dim: int
    seed: int | None = None

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)
        validate(self)


def _layer_output_shape(spec, in_shape, index):
    if spec.kind == "dense":
        if spec.weights is None or spec.weights.ndim != 2:
            raise ModelSpecError(f"layer {index}: dense needs a 2-D weight matrix")
        if len(in_shape) != 1:
            raise ModelSpecError(f"layer {index}: dense expects a flat input, got {in_shape}")
        out, inp = spec.weights.shape
        if in_shape[0] != inp:
            raise ModelSpecError(
                f"layer {index}: dense weights expect width {inp}, input has {in_shape[0]}"
            )
        if spec.bias is not None and spec.bias.shape != (out,):
            raise ModelSpecError(f"layer {index}: bias shape {spec.bias.shape} != ({out},)")
        return (out,)
    if spec.kind == "conv2d":
        if spec.weights is None or spec.weights.ndim != 4:
            raise ModelSpecError(f"layer {index}: conv2d needs a 4-D weight tensor")
        if len(in_shape) != 3:
            raise ModelSpecError(f"layer {index}: conv2d expects (C,H,W) input, got {in_shape}")
        o, c, kh, kw = spec.weights.shape
        stride = spec.stride or 1
        if in_shape[0] != c:
            raise ModelSpecError(
                f"layer {index}: conv2d weights expect {c} channels, input has {in_shape[0]}"
            )
        if in_shape[1] < kh or in_shape[2] < kw:
            raise ModelSpecError(f"layer {index}: kernel {kh}x{kw} larger than input {in_shape}")
        if spec.bias is not None and spec.bias.shape != (o,):
            raise ModelSpecError(f"layer {index}: bias shape {spec.bias.shape} != ({o},)")
        return (o, (in_shape[1] - kh) // stride + 1, (in_shape[2] - kw) // stride + 1)
    if spec.kind == "maxpool":
        if len(in_shape) != 3:
            raise ModelSpecError(f"layer {index}: maxpool expects (C,H,W) input, got {in_shape}")
        k = spec.kernel_size or 2
        stride = spec.stride or k
        if in_shape[1] < k or in_shape[2] < k:
            raise ModelSpecError(f"layer {index}: pool window {k} larger than input {in_shape}")
        return (in_shape[0], (in_shape[1] - k) // stride + 1, (in_shape[2] - k) // stride + 1)
    if spec.kind == "relu":
        return in_shape
    if spec.kind == "flatten":
        return (int(np.prod(in_shape)),)
    raise ModelSpecError(f"layer {index}: unknown kind {spec.kind!r}")


def layer_shapes(model):
    """Output shape of every layer, checking the chain end to end."""
    shapes = []
    shape = model.input_shape
    for i, spec in enumerate(model.layers):
        shape = _layer_output_shape(spec, shape, i)
        shapes.append(shape)
    return shapes


def validate(model):
    if not model.layers:
        raise ModelSpecError("model has no layers")
    if not 0 <= model.feature_layer_index < len(model.layers):
        raise ModelSpecError(
            f"feature_layer_index {model.feature_layer_index} outside 0..{len(model.layers) - 1}"
        )
    shapes = layer_shapes(model)
    if shapes[-1] != (model.num_classes,):
        raise ModelSpecError(
            f"output layer emits {shapes[-1]}, expected ({model.num_classes},)"
        )
    feat = int(np.prod(shapes[model.feature_layer_index]))
    if feat != model.feature_dim:
        raise ModelSpecError(
            f"feature layer emits {feat} values, expected feature_dim {model.feature_dim}"
        )
    return shapes


@dataclass
class ForwardTrace:
    """Everything one forward pass produced, layer by layer (no batch dim).

    layer_inputs[l] is what layer l consumed (its pre-activation when l is
    a ReLU); layer_outputs[l] is what it emitted."""

    layer_inputs: list = field(default_factory=list)
    layer_outputs: list = field(default_factory=list)
    logits: np.ndarray | None = None
    confidences: np.ndarray | None = None
    predicted_class: int = -1


def softmax(logits):
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def _apply_layer(spec, x, index):
    """x is batched (B, ...)."""
    if spec.kind == "dense":
        return layers.dense_forward(x, spec.weights, spec.bias)
    if spec.kind == "conv2d":
        return layers.conv2d_forward(x, spec.weights, spec.bias, spec.stride or 1)
    if spec.kind == "maxpool":
        k = spec.kernel_size or 2
        return layers.maxpool2d_forward(x, k, spec.stride or k)[0]
    if spec.kind == "relu":
        return layers.relu_forward(x)
    if spec.kind == "flatten":
        return layers.flatten_forward(x)
    raise ModelSpecError(f"layer {index}: unknown kind {spec.kind!r}")


def forward(model, x):
    """Run one sample through the chain and record the full trace."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.input_shape:
        raise ShapeError(0, f"input shape {x.shape} != model input {model.input_shape}")
    trace = ForwardTrace()
    a = x[None]
    for i, spec in enumerate(model.layers):
        try:
            out = _apply_layer(spec, a, i)
        except (ValueError, ModelSpecError) as exc:  # pragma: no cover - guarded by validate
            raise ShapeError(i, str(exc)) from exc
        trace.layer_inputs.append(a[0])
        trace.layer_outputs.append(out[0])
        a = out
    trace.logits = trace.layer_outputs[-1]
    if trace.logits.ndim != 1:
        raise ShapeError(len(model.layers) - 1, "final layer did not emit a flat score vector")
    trace.confidences = softmax(trace.logits)
    trace.predicted_class = int(np.argmax(trace.logits))
    return trace


def extract_features(trace, model):
    """Activation of the feature layer, flattened to length feature_dim."""
    if len(trace.layer_outputs) != len(model.layers):
        raise ModelSpecError("trace does not match this model (layer count differs)")
    feat = trace.layer_outputs[model.feature_layer_index].reshape(-1)
    if feat.shape[0] != model.feature_dim:
        raise ModelSpecError("trace does not match this model (feature width differs)")
    return feat


def backward_head(model, trace, target_class, rule=BackwardRule.STANDARD):
    """Gradient-style importance of each feature for one output logit.

    Propagates from logits[target_class] back through the layers above the
    feature layer only. With the standard rule this is exactly
    d logits[target] / d feature."""

    if not 0 <= target_class < model.num_classes:
        raise ValueError(f"target class {target_class} outside 0..{model.num_classes - 1}")
    rule = BackwardRule(rule)
    g = np.zeros(model.num_classes, dtype=np.float64)
    g[target_class] = 1.0
    for l in range(len(model.layers) - 1, model.feature_layer_index, -1):
        spec = model.layers[l]
        if spec.kind == "dense":
            g = layers.dense_backward_input(g[None], spec.weights)[0]
        elif spec.kind == "relu":
            g = layers.relu_backward(trace.layer_inputs[l], g, rule)
        elif spec.kind == "flatten":
            g = g.reshape(trace.layer_inputs[l].shape)
        elif spec.kind == "conv2d":
            dx = layers.conv2d_backward_input(
                g[None], spec.weights, (1, *trace.layer_inputs[l].shape), spec.stride or 1
            )
            g = dx[0]
        elif spec.kind == "maxpool":
            k = spec.kernel_size or 2
            xin = trace.layer_inputs[l]
            _, idx = layers.maxpool2d_forward(xin[None], k, spec.stride or k)
            g = layers.maxpool2d_backward(g[None], idx, xin.shape[1], xin.shape[2])[0]
        else:  # pragma: no cover
            raise ModelSpecError(f"layer {l}: unknown kind {spec.kind!r}")
    return g.reshape(-1)


def desk_model(num_classes=10, input_shape=(1, 28, 28), feature_dim=84, seed=1):
    """Default desk-scale CNN: two conv/pool stages, an 84-unit feature
    layer behind ReLU, and a dense scoring head. Trains on CPU in minutes."""

    rng = np.random.default_rng(seed)

    def he(shape, fan_in):
        return rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)

    c, h, w = input_shape
    spec = [
        LayerSpec("conv2d", weights=he((8, c, 5, 5), c * 25), bias=np.zeros(8), stride=1),
        LayerSpec("relu"),
        LayerSpec("maxpool", kernel_size=2, stride=2),
        LayerSpec("conv2d", weights=he((16, 8, 5, 5), 8 * 25), bias=np.zeros(16), stride=1),
        LayerSpec("relu"),
        LayerSpec("maxpool", kernel_size=2, stride=2),
        LayerSpec("flatten"),
    ]
    h2 = ((h - 4) // 2 - 4) // 2
    w2 = ((w - 4) // 2 - 4) // 2
    flat = 16 * h2 * w2
    spec += [
        LayerSpec("dense", weights=he((feature_dim, flat), flat), bias=np.zeros(feature_dim)),
        LayerSpec("relu"),
        LayerSpec(
            "dense",
            weights=he((num_classes, feature_dim), feature_dim),
            bias=np.zeros(num_classes),
        ),
    ]
    return Model(
        layers=spec,
        input_shape=input_shape,
        feature_layer_index=len(spec) - 2,
        num_classes=num_classes,
        feature_dim=feature_dim,
        seed=seed,
    )
