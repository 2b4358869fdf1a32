"""Model persistence: one self-describing file, bit-exact round trip.

Layout: a magic line, a canonical-JSON header (layer kinds, geometry,
array shapes, feature layer index, M, N, training seed), then the raw
little-endian float64 bytes of every array in layer order."""

import json

import numpy as np

from ..errors import ModelFormatError
from .model import LayerSpec, Model

MAGIC = b"fuzzlens-model 1\n"


def _header(model):
    layers = []
    for spec in model.layers:
        entry = {"kind": spec.kind}
        if spec.kernel_size is not None:
            entry["kernel_size"] = spec.kernel_size
        if spec.stride is not None:
            entry["stride"] = spec.stride
        if spec.weights is not None:
            entry["weights"] = list(spec.weights.shape)
        if spec.bias is not None:
            entry["bias"] = list(spec.bias.shape)
        layers.append(entry)
    return {
        "input_shape": list(model.input_shape),
        "feature_layer_index": model.feature_layer_index,
        "num_classes": model.num_classes,
        "feature_dim": model.feature_dim,
        "seed": model.seed,
        "layers": layers,
    }


def save_model(model, path):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(_header(model), sort_keys=True, separators=(",", ":")).encode())
        fh.write(b"\n")
        for spec in model.layers:
            if spec.weights is not None:
                fh.write(np.ascontiguousarray(spec.weights, dtype="<f8").tobytes())
            if spec.bias is not None:
                fh.write(np.ascontiguousarray(spec.bias, dtype="<f8").tobytes())


def load_model(path):
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != MAGIC:
            raise ModelFormatError(f"{path}: not a fuzzlens model file (magic {magic!r})")
        try:
            header = json.loads(fh.readline().decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelFormatError(f"{path}: unreadable header: {exc}") from exc
        blob = fh.read()

    offset = 0

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        end = offset + count * 8
        if end > len(blob):
            raise ModelFormatError(f"{path}: truncated weight data")
        arr = np.frombuffer(blob[offset:end], dtype="<f8").reshape(shape).copy()
        offset = end
        return arr

    specs = []
    for entry in header["layers"]:
        specs.append(
            LayerSpec(
                kind=entry["kind"],
                weights=take(entry["weights"]) if "weights" in entry else None,
                bias=take(entry["bias"]) if "bias" in entry else None,
                kernel_size=entry.get("kernel_size"),
                stride=entry.get("stride"),
            )
        )
    if offset != len(blob):
        raise ModelFormatError(f"{path}: {len(blob) - offset} trailing bytes after weights")
    return Model(
        layers=specs,
        input_shape=tuple(header["input_shape"]),
        feature_layer_index=header["feature_layer_index"],
        num_classes=header["num_classes"],
        feature_dim=header["feature_dim"],
        seed=header["seed"],
    )
