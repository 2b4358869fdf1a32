"""Plain minibatch SGD with momentum. Deliberately unadorned: no
augmentation, no schedules, no regularisation tricks."""

import copy
from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingDivergedError
from . import layers


@dataclass
class TrainConfig:
    epochs: int = 5
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 64
    seed: int = 1


@dataclass
class TrainReport:
    epoch_loss: list = field(default_factory=list)
    epoch_accuracy: list = field(default_factory=list)
    final_train_accuracy: float = 0.0
    test_accuracy: float | None = None


def _forward_cached(model, x):
    """Batched forward keeping exactly what the backward pass needs."""
    caches = []
    a = x
    for spec in model.layers:
        if spec.kind == "dense":
            caches.append(("dense", a))
            a = layers.dense_forward(a, spec.weights, spec.bias)
        elif spec.kind == "conv2d":
            caches.append(("conv2d", a))
            a = layers.conv2d_forward(a, spec.weights, spec.bias, spec.stride or 1)
        elif spec.kind == "maxpool":
            k = spec.kernel_size or 2
            y, idx = layers.maxpool2d_forward(a, k, spec.stride or k)
            caches.append(("maxpool", (idx, a.shape[2], a.shape[3])))
            a = y
        elif spec.kind == "relu":
            caches.append(("relu", a))
            a = layers.relu_forward(a)
        elif spec.kind == "flatten":
            caches.append(("flatten", a.shape))
            a = layers.flatten_forward(a)
    return a, caches


def _backward(model, caches, dlogits, grads):
    g = dlogits
    for l in range(len(model.layers) - 1, -1, -1):
        kind, cache = caches[l]
        spec = model.layers[l]
        if kind == "dense":
            dw, db = layers.dense_backward_params(cache, g)
            grads[l][0] += dw
            if spec.bias is not None:
                grads[l][1] += db
            g = layers.dense_backward_input(g, spec.weights)
        elif kind == "conv2d":
            dw, db = layers.conv2d_backward_weights(cache, g, spec.weights.shape, spec.stride or 1)
            grads[l][0] += dw
            if spec.bias is not None:
                grads[l][1] += db
            g = layers.conv2d_backward_input(g, spec.weights, cache.shape, spec.stride or 1)
        elif kind == "maxpool":
            idx, h, w = cache
            g = layers.maxpool2d_backward(g, idx, h, w)
        elif kind == "relu":
            g = layers.relu_backward(cache, g, layers.BackwardRule.STANDARD)
        elif kind == "flatten":
            g = g.reshape(cache)


def _batch_logits(model, x):
    a = x
    for spec in model.layers:
        if spec.kind == "dense":
            a = layers.dense_forward(a, spec.weights, spec.bias)
        elif spec.kind == "conv2d":
            a = layers.conv2d_forward(a, spec.weights, spec.bias, spec.stride or 1)
        elif spec.kind == "maxpool":
            k = spec.kernel_size or 2
            a = layers.maxpool2d_forward(a, k, spec.stride or k)[0]
        elif spec.kind == "relu":
            a = layers.relu_forward(a)
        elif spec.kind == "flatten":
            a = layers.flatten_forward(a)
    return a


def predict(model, images, batch_size=256):
    out = np.empty(len(images), dtype=np.int64)
    for s in range(0, len(images), batch_size):
        logits = _batch_logits(model, np.asarray(images[s : s + batch_size], dtype=np.float64))
        out[s : s + len(logits)] = logits.argmax(axis=1)
    return out


def accuracy(model, images, labels, batch_size=256):
    return float((predict(model, images, batch_size) == np.asarray(labels)).mean())


def train(model, images, labels, cfg, test_images=None, test_labels=None, log=None):
    """Train a private copy of `model`; the input model is left untouched.

    Returns (trained_model, report). Deterministic for a fixed cfg.seed.
    Raises TrainingDivergedError as soon as the loss stops being finite."""

    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) == 0:
        raise ValueError("empty training set")
    if labels.min() < 0 or labels.max() >= model.num_classes:
        raise ValueError("labels outside 0..num_classes-1")

    net = copy.deepcopy(model)
    velocity = {}
    for l, spec in enumerate(net.layers):
        if spec.weights is not None:
            velocity[l] = [
                np.zeros_like(spec.weights),
                np.zeros_like(spec.bias) if spec.bias is not None else None,
            ]

    report = TrainReport()
    n = len(images)
    # overflow shows up as a non-finite loss, which we report ourselves
    with np.errstate(over="ignore", invalid="ignore"):
        _run_epochs(net, images, labels, cfg, velocity, report, log)
    report.final_train_accuracy = accuracy(net, images, labels)
    if test_images is not None and test_labels is not None:
        report.test_accuracy = accuracy(net, test_images, test_labels)
    net.seed = cfg.seed
    return net, report


def _run_epochs(net, images, labels, cfg, velocity, report, log):
    rng = np.random.default_rng(cfg.seed)
    n = len(images)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for s in range(0, n, cfg.batch_size):
            sel = order[s : s + cfg.batch_size]
            xb, yb = images[sel], labels[sel]
            logits, caches = _forward_cached(net, xb)
            zmax = logits.max(axis=1, keepdims=True)
            lse = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
            loss = float(np.mean(lse - logits[np.arange(len(yb)), yb]))
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss {loss} at epoch {epoch} batch {s // cfg.batch_size}"
                )
            total_loss += loss * len(yb)
            correct += int((logits.argmax(axis=1) == yb).sum())

            probs = np.exp(logits - lse[:, None])
            probs[np.arange(len(yb)), yb] -= 1.0
            dlogits = probs / len(yb)

            grads = {
                l: [np.zeros_like(v[0]), None if v[1] is None else np.zeros_like(v[1])]
                for l, v in velocity.items()
            }
            _backward(net, caches, dlogits, grads)
            for l, (gw, gb) in grads.items():
                spec = net.layers[l]
                vw, vb = velocity[l]
                vw *= cfg.momentum
                vw -= cfg.learning_rate * gw
                spec.weights += vw
                if gb is not None and vb is not None:
                    vb *= cfg.momentum
                    vb -= cfg.learning_rate * gb
                    spec.bias += vb

        report.epoch_loss.append(total_loss / n)
        report.epoch_accuracy.append(correct / n)
        if log:
            log(
                f"epoch {epoch + 1}/{cfg.epochs}: "
                f"loss {report.epoch_loss[-1]:.4f} acc {report.epoch_accuracy[-1]:.4f}"
            )
