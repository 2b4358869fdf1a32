"""Pure-numpy implementations of the hot kernels.

Same call signatures as the compiled extension (`_ext`); selected as a
fallback when the extension is not built. Convolutions go through
stride-trick windows plus BLAS tensordot, which is the fastest route
numpy offers for these shapes.
"""

import numpy as np

NAME = "numpy"


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _conv_windows(x, kh, kw, stride):
    b, c, h, w = x.shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    sb, sc, sh, sw = x.strides
    shape = (b, c, oh, ow, kh, kw)
    strides = (sb, sc, sh * stride, sw * stride, sh, sw)
    return np.lib.stride_tricks.as_strided(x, shape, strides, writeable=False)


def conv2d_forward(x, w, b=None, stride=1):
    """Valid cross-correlation. x:(B,C,H,W), w:(O,C,KH,KW) -> (B,O,OH,OW)."""
    x, w = _f64(x), _f64(w)
    win = _conv_windows(x, w.shape[2], w.shape[3], stride)
    y = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))
    y = np.ascontiguousarray(y.transpose(0, 3, 1, 2))
    if b is not None:
        y += np.asarray(b, dtype=np.float64).reshape(1, -1, 1, 1)
    return y


def conv2d_backward_input(dy, w, x_shape, stride=1):
    dy, w = _f64(dy), _f64(w)
    _, _, kh, kw = w.shape
    _, _, oh, ow = dy.shape
    dx = np.zeros(x_shape, dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            # contribution of kernel tap (i,j) to every input it touched
            g = np.tensordot(dy, w[:, :, i, j], axes=([1], [0]))  # (B,OH,OW,C)
            dx[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += g.transpose(
                0, 3, 1, 2
            )
    return dx


def conv2d_backward_weights(x, dy, w_shape, stride=1):
    x, dy = _f64(x), _f64(dy)
    _, _, kh, kw = w_shape
    win = _conv_windows(x, kh, kw, stride)
    dw = np.tensordot(dy, win, axes=([0, 2, 3], [0, 2, 3]))
    db = dy.sum(axis=(0, 2, 3))
    return np.ascontiguousarray(dw), db


def maxpool2d_forward(x, k, stride):
    """Returns (pooled, idx) where idx holds the flat H*W position of each
    window maximum; ties go to the first element in row-major window order."""
    x = _f64(x)
    b, c, h, w = x.shape
    win = _conv_windows(x, k, k, stride)
    oh, ow = win.shape[2], win.shape[3]
    flat = win.reshape(b, c, oh, ow, k * k)
    arg = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    rows = np.arange(oh).reshape(1, 1, oh, 1) * stride + arg // k
    cols = np.arange(ow).reshape(1, 1, 1, ow) * stride + arg % k
    idx = rows * w + cols
    return np.ascontiguousarray(y), np.ascontiguousarray(idx.astype(np.int64))


def maxpool2d_backward(dy, idx, h, w):
    dy = _f64(dy)
    b, c = dy.shape[0], dy.shape[1]
    dx = np.zeros((b * c, h * w), dtype=np.float64)
    plane = np.arange(b * c).reshape(b * c, 1) * (h * w)
    flat = idx.reshape(b * c, -1) + plane
    np.add.at(dx.reshape(-1), flat.ravel(), dy.reshape(b * c, -1).ravel())
    return dx.reshape(b, c, h, w)


def codeword_truths(codes, truth):
    """Zadeh truth of each stored codeword against one truth vector.

    codes:(K,M) uint8 with 0 -> absent, 1 -> present, 2 -> irrelevant.
    Irrelevant positions are excluded from the min; an all-irrelevant row
    gets the vacuous value 1.0.
    """
    codes = np.ascontiguousarray(codes, dtype=np.uint8)
    truth = _f64(truth)
    t = np.where(codes == 1, truth, np.where(codes == 0, 1.0 - truth, np.inf))
    out = t.min(axis=1)
    out[~np.isfinite(out)] = 1.0
    return out
