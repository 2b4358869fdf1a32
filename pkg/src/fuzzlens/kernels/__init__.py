"""Kernel backend selection.

The compiled extension is preferred when it was built; otherwise the
numpy fallback is used. FUZZLENS_KERNELS=python|compiled forces a
backend (the latter raises if the extension is missing).
"""

import os

from . import numpy_backend

_choice = os.environ.get("FUZZLENS_KERNELS", "auto")

if _choice == "python":
    _impl = numpy_backend
elif _choice in ("auto", "compiled"):
    try:
        from . import _ext as _impl
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = numpy_backend
else:
    raise ValueError(f"FUZZLENS_KERNELS must be auto|python|compiled, got {_choice!r}")

BACKEND = _impl.NAME

conv2d_forward = _impl.conv2d_forward
conv2d_backward_input = _impl.conv2d_backward_input
conv2d_backward_weights = _impl.conv2d_backward_weights
maxpool2d_forward = _impl.maxpool2d_forward
maxpool2d_backward = _impl.maxpool2d_backward
codeword_truths = _impl.codeword_truths

__all__ = [
    "BACKEND",
    "conv2d_forward",
    "conv2d_backward_input",
    "conv2d_backward_weights",
    "maxpool2d_forward",
    "maxpool2d_backward",
    "codeword_truths",
]
