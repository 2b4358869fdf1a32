"""Kernel correctness against naive loop oracles, plus cross-backend
agreement (the compiled extension must reproduce the numpy fallback)."""

import numpy as np
import pytest

from fuzzlens.kernels import numpy_backend

from conftest import available_backends


def naive_conv2d(x, w, b, stride):
    bs, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    oh = (h - kh) // stride + 1
    ow = (wd - kw) // stride + 1
    y = np.zeros((bs, cout, oh, ow))
    for n in range(bs):
        for o in range(cout):
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for c in range(cin):
                        for p in range(kh):
                            for q in range(kw):
                                acc += x[n, c, i * stride + p, j * stride + q] * w[o, c, p, q]
                    y[n, o, i, j] = acc + (b[o] if b is not None else 0.0)
    return y


def naive_maxpool(x, k, stride):
    bs, c, h, w = x.shape
    oh = (h - k) // stride + 1
    ow = (w - k) // stride + 1
    y = np.zeros((bs, c, oh, ow))
    idx = np.zeros((bs, c, oh, ow), dtype=np.int64)
    for n in range(bs):
        for ch in range(c):
            for i in range(oh):
                for j in range(ow):
                    best, bi, bj = -np.inf, 0, 0
                    for p in range(k):
                        for q in range(k):
                            v = x[n, ch, i * stride + p, j * stride + q]
                            if v > best:
                                best, bi, bj = v, i * stride + p, j * stride + q
                    y[n, ch, i, j] = best
                    idx[n, ch, i, j] = bi * w + bj
    return y, idx


@pytest.mark.parametrize("stride", [1, 2])
def test_conv_forward_matches_naive(backend, stride):
    rng = np.random.default_rng(7)
    x = rng.normal(size=(2, 3, 8, 7))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)
    got = backend.conv2d_forward(x, w, b, stride)
    np.testing.assert_allclose(got, naive_conv2d(x, w, b, stride), rtol=1e-12, atol=1e-12)


def test_conv_forward_no_bias(backend):
    rng = np.random.default_rng(8)
    x = rng.normal(size=(1, 2, 5, 5))
    w = rng.normal(size=(3, 2, 2, 2))
    got = backend.conv2d_forward(x, w, None, 1)
    np.testing.assert_allclose(got, naive_conv2d(x, w, None, 1), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("stride", [1, 2])
def test_conv_backward_input_is_adjoint(backend, stride):
    # <dy, conv(x)> == <dx, x> for the linear (bias-free) map
    rng = np.random.default_rng(9)
    x = rng.normal(size=(2, 2, 7, 7))
    w = rng.normal(size=(3, 2, 3, 3))
    y = backend.conv2d_forward(x, w, None, stride)
    dy = rng.normal(size=y.shape)
    dx = backend.conv2d_backward_input(dy, w, x.shape, stride)
    np.testing.assert_allclose((dy * y).sum(), (dx * x).sum(), rtol=1e-10)


@pytest.mark.parametrize("stride", [1, 2])
def test_conv_backward_weights_finite_difference(backend, stride):
    rng = np.random.default_rng(10)
    x = rng.normal(size=(2, 2, 6, 6))
    w = rng.normal(size=(2, 2, 3, 3))
    b = rng.normal(size=2)
    dy = rng.normal(size=backend.conv2d_forward(x, w, b, stride).shape)
    dw, db = backend.conv2d_backward_weights(x, dy, w.shape, stride)
    h = 1e-6
    for index in [(0, 0, 0, 0), (1, 1, 2, 2), (0, 1, 1, 0)]:
        wp, wm = w.copy(), w.copy()
        wp[index] += h
        wm[index] -= h
        fd = (
            (dy * backend.conv2d_forward(x, wp, b, stride)).sum()
            - (dy * backend.conv2d_forward(x, wm, b, stride)).sum()
        ) / (2 * h)
        assert abs(fd - dw[index]) < 1e-6 * max(1.0, abs(fd))
    np.testing.assert_allclose(db, dy.sum(axis=(0, 2, 3)), rtol=1e-12)


@pytest.mark.parametrize("k,stride", [(2, 2), (3, 1), (2, 1)])
def test_maxpool_matches_naive(backend, k, stride):
    rng = np.random.default_rng(11)
    x = rng.normal(size=(2, 3, 7, 6))
    y, idx = backend.maxpool2d_forward(x, k, stride)
    ny, nidx = naive_maxpool(x, k, stride)
    np.testing.assert_array_equal(y, ny)
    np.testing.assert_array_equal(idx, nidx)


def test_maxpool_tie_goes_to_first_row_major(backend):
    x = np.ones((1, 1, 4, 4))
    y, idx = backend.maxpool2d_forward(x, 2, 2)
    assert y.tolist() == [[[[1.0, 1.0], [1.0, 1.0]]]]
    # windows start at (0,0),(0,2),(2,0),(2,2); first element wins each tie
    assert idx.reshape(-1).tolist() == [0, 2, 8, 10]


def test_maxpool_backward_scatter(backend):
    rng = np.random.default_rng(12)
    x = rng.normal(size=(1, 2, 6, 6))
    y, idx = backend.maxpool2d_forward(x, 2, 2)
    dy = rng.normal(size=y.shape)
    dx = backend.maxpool2d_backward(dy, idx, 6, 6)
    assert dx.shape == x.shape
    np.testing.assert_allclose(dx.sum(), dy.sum(), rtol=1e-12)
    # every nonzero lands on a window argmax
    nz = np.flatnonzero(dx.reshape(2, -1)[0])
    assert set(nz) <= set(idx[0, 0].reshape(-1).tolist())


def test_maxpool_backward_overlapping_windows_accumulates(backend):
    x = np.zeros((1, 1, 3, 3))
    x[0, 0, 1, 1] = 5.0  # argmax of all four 2x2 windows at stride 1
    y, idx = backend.maxpool2d_forward(x, 2, 1)
    dy = np.ones_like(y)
    dx = backend.maxpool2d_backward(dy, idx, 3, 3)
    assert dx[0, 0, 1, 1] == 4.0
    assert dx.sum() == 4.0


def test_codeword_truths_hand_cases(backend):
    truth = np.array([0.9, 0.1, 0.5])
    codes = np.array(
        [
            [1, 0, 2],  # min(0.9, 0.9) = 0.9
            [1, 1, 1],  # min(0.9, 0.1, 0.5)
            [2, 2, 2],  # vacuous -> 1.0
            [0, 2, 2],  # 1 - 0.9
        ],
        dtype=np.uint8,
    )
    got = backend.codeword_truths(codes, truth)
    np.testing.assert_allclose(got, [0.9, 0.1, 1.0, 0.09999999999999998])


def test_backends_agree_on_random_inputs():
    backends = available_backends()
    if len(backends) < 2:
        pytest.skip("compiled extension not built")
    a, b = backends
    rng = np.random.default_rng(13)
    for _ in range(10):
        x = rng.normal(size=(2, rng.integers(1, 4), 9, 9))
        w = rng.normal(size=(rng.integers(1, 5), x.shape[1], 3, 3))
        bias = rng.normal(size=w.shape[0])
        stride = int(rng.integers(1, 3))
        ya = a.conv2d_forward(x, w, bias, stride)
        yb = b.conv2d_forward(x, w, bias, stride)
        np.testing.assert_allclose(ya, yb, rtol=1e-12, atol=1e-12)
        dy = rng.normal(size=ya.shape)
        np.testing.assert_allclose(
            a.conv2d_backward_input(dy, w, x.shape, stride),
            b.conv2d_backward_input(dy, w, x.shape, stride),
            rtol=1e-12,
            atol=1e-12,
        )
        dwa, dba = a.conv2d_backward_weights(x, dy, w.shape, stride)
        dwb, dbb = b.conv2d_backward_weights(x, dy, w.shape, stride)
        np.testing.assert_allclose(dwa, dwb, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(dba, dbb, rtol=1e-12, atol=1e-12)
        ka, ia = a.maxpool2d_forward(x, 2, 2)
        kb, ib = b.maxpool2d_forward(x, 2, 2)
        np.testing.assert_array_equal(ka, kb)
        np.testing.assert_array_equal(ia, ib)
        codes = rng.integers(0, 3, size=(20, 12)).astype(np.uint8)
        t = rng.uniform(size=12)
        np.testing.assert_array_equal(a.codeword_truths(codes, t), b.codeword_truths(codes, t))


def test_numpy_backend_rejects_nothing_weird():
    # float32 inputs are upcast, not rejected
    x = np.ones((1, 1, 4, 4), dtype=np.float32)
    w = np.ones((1, 1, 2, 2), dtype=np.float32)
    y = numpy_backend.conv2d_forward(x, w, None, 1)
    assert y.dtype == np.float64
