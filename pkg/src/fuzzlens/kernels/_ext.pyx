# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: direct-loop convolution, max-pooling with argmax
routing, and batched codeword truth evaluation.

Loop order is fixed, so results are deterministic run to run. The numpy
backend reassociates sums through BLAS; the two agree to ~1e-13 relative.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "compiled"


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def conv2d_forward(x, w, b=None, stride=1):
    x = _f64(x)
    w = _f64(w)
    cdef double[:, :, :, ::1] xv = x
    cdef double[:, :, :, ::1] wv = w
    cdef Py_ssize_t bs = xv.shape[0], cin = xv.shape[1], h = xv.shape[2], wd = xv.shape[3]
    cdef Py_ssize_t cout = wv.shape[0], kh = wv.shape[2], kw = wv.shape[3]
    cdef Py_ssize_t st = stride
    cdef Py_ssize_t oh = (h - kh) // st + 1
    cdef Py_ssize_t ow = (wd - kw) // st + 1
    out = np.zeros((bs, cout, oh, ow), dtype=np.float64)
    cdef double[:, :, :, ::1] yv = out
    cdef double[::1] bv
    cdef bint has_bias = b is not None
    if has_bias:
        bv = _f64(b).reshape(-1)
    cdef Py_ssize_t n, o, i, j, c, p, q
    cdef double acc
    with nogil:
        for n in range(bs):
            for o in range(cout):
                for i in range(oh):
                    for j in range(ow):
                        acc = 0.0
                        for c in range(cin):
                            for p in range(kh):
                                for q in range(kw):
                                    acc += xv[n, c, i * st + p, j * st + q] * wv[o, c, p, q]
                        yv[n, o, i, j] = acc
        if has_bias:
            for n in range(bs):
                for o in range(cout):
                    for i in range(oh):
                        for j in range(ow):
                            yv[n, o, i, j] += bv[o]
    return out


def conv2d_backward_input(dy, w, x_shape, stride=1):
    dy = _f64(dy)
    w = _f64(w)
    cdef double[:, :, :, ::1] gv = dy
    cdef double[:, :, :, ::1] wv = w
    cdef Py_ssize_t bs = gv.shape[0], cout = gv.shape[1], oh = gv.shape[2], ow = gv.shape[3]
    cdef Py_ssize_t cin = wv.shape[1], kh = wv.shape[2], kw = wv.shape[3]
    cdef Py_ssize_t st = stride
    dx = np.zeros(tuple(x_shape), dtype=np.float64)
    cdef double[:, :, :, ::1] dxv = dx
    cdef Py_ssize_t n, o, i, j, c, p, q
    cdef double g
    with nogil:
        for n in range(bs):
            for o in range(cout):
                for i in range(oh):
                    for j in range(ow):
                        g = gv[n, o, i, j]
                        for c in range(cin):
                            for p in range(kh):
                                for q in range(kw):
                                    dxv[n, c, i * st + p, j * st + q] += g * wv[o, c, p, q]
    return dx


def conv2d_backward_weights(x, dy, w_shape, stride=1):
    x = _f64(x)
    dy = _f64(dy)
    cdef double[:, :, :, ::1] xv = x
    cdef double[:, :, :, ::1] gv = dy
    cdef Py_ssize_t bs = xv.shape[0], cin = xv.shape[1]
    cdef Py_ssize_t cout = gv.shape[1], oh = gv.shape[2], ow = gv.shape[3]
    cdef Py_ssize_t kh = w_shape[2], kw = w_shape[3]
    cdef Py_ssize_t st = stride
    dw = np.zeros((cout, cin, kh, kw), dtype=np.float64)
    db = np.zeros(cout, dtype=np.float64)
    cdef double[:, :, :, ::1] dwv = dw
    cdef double[::1] dbv = db
    cdef Py_ssize_t n, o, i, j, c, p, q
    cdef double g
    with nogil:
        for o in range(cout):
            for n in range(bs):
                for i in range(oh):
                    for j in range(ow):
                        g = gv[n, o, i, j]
                        dbv[o] += g
                        for c in range(cin):
                            for p in range(kh):
                                for q in range(kw):
                                    dwv[o, c, p, q] += g * xv[n, c, i * st + p, j * st + q]
    return dw, db


def maxpool2d_forward(x, k, stride):
    x = _f64(x)
    cdef double[:, :, :, ::1] xv = x
    cdef Py_ssize_t bs = xv.shape[0], ch = xv.shape[1], h = xv.shape[2], w = xv.shape[3]
    cdef Py_ssize_t kk = k, st = stride
    cdef Py_ssize_t oh = (h - kk) // st + 1
    cdef Py_ssize_t ow = (w - kk) // st + 1
    y = np.zeros((bs, ch, oh, ow), dtype=np.float64)
    idx = np.zeros((bs, ch, oh, ow), dtype=np.int64)
    cdef double[:, :, :, ::1] yv = y
    cdef long long[:, :, :, ::1] iv = idx
    cdef Py_ssize_t n, c, i, j, p, q, bi, bj
    cdef double best, v
    with nogil:
        for n in range(bs):
            for c in range(ch):
                for i in range(oh):
                    for j in range(ow):
                        best = xv[n, c, i * st, j * st]
                        bi = i * st
                        bj = j * st
                        for p in range(kk):
                            for q in range(kk):
                                v = xv[n, c, i * st + p, j * st + q]
                                if v > best:  # strict: first row-major max wins ties
                                    best = v
                                    bi = i * st + p
                                    bj = j * st + q
                        yv[n, c, i, j] = best
                        iv[n, c, i, j] = bi * w + bj
    return y, idx


def maxpool2d_backward(dy, idx, h, w):
    dy = _f64(dy)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    cdef double[:, :, :, ::1] gv = dy
    cdef long long[:, :, :, ::1] iv = idx
    cdef Py_ssize_t bs = gv.shape[0], ch = gv.shape[1], oh = gv.shape[2], ow = gv.shape[3]
    cdef Py_ssize_t hh = h, ww = w
    dx = np.zeros((bs, ch, hh, ww), dtype=np.float64)
    cdef double[:, :, :, ::1] dxv = dx
    cdef Py_ssize_t n, c, i, j
    cdef long long f
    with nogil:
        for n in range(bs):
            for c in range(ch):
                for i in range(oh):
                    for j in range(ow):
                        f = iv[n, c, i, j]
                        dxv[n, c, f // ww, f % ww] += gv[n, c, i, j]
    return dx


def codeword_truths(codes, truth):
    codes = np.ascontiguousarray(codes, dtype=np.uint8)
    truth = _f64(truth).reshape(-1)
    cdef unsigned char[:, ::1] cv = codes
    cdef double[::1] tv = truth
    cdef Py_ssize_t k = cv.shape[0], m = cv.shape[1]
    out = np.empty(k, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j
    cdef double best, t
    cdef unsigned char s
    cdef bint any_set
    with nogil:
        for i in range(k):
            best = 1.0
            any_set = False
            for j in range(m):
                s = cv[i, j]
                if s == 2:  # irrelevant: excluded from the min
                    continue
                t = tv[j] if s == 1 else 1.0 - tv[j]
                if not any_set or t < best:
                    best = t
                    any_set = True
            ov[i] = best if any_set else 1.0
    return out
