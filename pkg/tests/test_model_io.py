"""Model file round trips: bit-exact weights, stable bytes, metadata."""

import numpy as np
import pytest

from fuzzlens.errors import ModelFormatError
from fuzzlens.nnet import desk_model, forward, load_model, save_model


def test_round_trip_bit_exact(tmp_path):
    model = desk_model(seed=11)
    model.seed = 42
    path = tmp_path / "model.fzm"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.feature_layer_index == model.feature_layer_index
    assert loaded.num_classes == model.num_classes
    assert loaded.feature_dim == model.feature_dim
    assert loaded.seed == 42
    assert loaded.input_shape == model.input_shape
    for a, b in zip(model.layers, loaded.layers):
        assert a.kind == b.kind
        assert a.kernel_size == b.kernel_size
        assert a.stride == b.stride
        if a.weights is None:
            assert b.weights is None
        else:
            assert np.array_equal(a.weights, b.weights)
    x = np.random.default_rng(0).uniform(size=(1, 28, 28))
    np.testing.assert_array_equal(forward(model, x).logits, forward(loaded, x).logits)


def test_save_load_save_bytes_identical(tmp_path):
    model = desk_model(seed=5)
    p1, p2 = tmp_path / "a.fzm", tmp_path / "b.fzm"
    save_model(model, p1)
    save_model(load_model(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.fzm"
    path.write_bytes(b"not a model\n{}\n")
    with pytest.raises(ModelFormatError, match="magic"):
        load_model(path)


def test_truncated_weights_rejected(tmp_path):
    model = desk_model(seed=5)
    path = tmp_path / "model.fzm"
    save_model(model, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-16])
    with pytest.raises(ModelFormatError, match="truncated"):
        load_model(path)


def test_trailing_bytes_rejected(tmp_path):
    model = desk_model(seed=5)
    path = tmp_path / "model.fzm"
    save_model(model, path)
    path.write_bytes(path.read_bytes() + b"\x00" * 8)
    with pytest.raises(ModelFormatError, match="trailing"):
        load_model(path)
