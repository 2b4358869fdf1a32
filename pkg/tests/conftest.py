import numpy as np
import pytest

from fuzzlens.kernels import numpy_backend

try:
    from fuzzlens.kernels import _ext
except ImportError:
    _ext = None

from fuzzlens.nnet import LayerSpec, Model


def available_backends():
    backends = [numpy_backend]
    if _ext is not None:
        backends.append(_ext)
    return backends


@pytest.fixture(params=available_backends(), ids=lambda b: b.NAME)
def backend(request):
    return request.param


def identity_head_model(head_layers, feature_dim, num_classes):
    """Model whose feature layer reproduces the input verbatim (identity
    dense), so finite differences on the input probe the head exactly."""
    layers = [LayerSpec("dense", weights=np.eye(feature_dim))] + list(head_layers)
    return Model(
        layers=layers,
        input_shape=(feature_dim,),
        feature_layer_index=0,
        num_classes=num_classes,
        feature_dim=feature_dim,
    )


def random_dense_head(rng, feature_dim, num_classes, hidden=(), bias=True, positive=False):
    """Dense/ReLU head stack as LayerSpecs (ReLU between dense layers)."""
    sizes = [feature_dim, *hidden, num_classes]
    layers = []
    for i in range(len(sizes) - 1):
        if positive:
            w = rng.uniform(0.1, 1.0, size=(sizes[i + 1], sizes[i]))
            b = rng.uniform(0.0, 0.5, size=sizes[i + 1]) if bias else None
        else:
            w = rng.normal(0.0, 1.0, size=(sizes[i + 1], sizes[i]))
            b = rng.normal(0.0, 0.5, size=sizes[i + 1]) if bias else None
        layers.append(LayerSpec("dense", weights=w, bias=b))
        if i < len(sizes) - 2:
            layers.append(LayerSpec("relu"))
    return layers
