"""fuzzlens: explain a small black-box image classifier post-hoc.

Per-feature importance measures are min-max normalised into fuzzy truth
values, rounded into ternary codewords (present / absent / irrelevant),
and classified by Zadeh min/argmax over a codebook harvested from the
training set. Fidelity to the black box — not ground-truth accuracy —
is the figure of merit.
"""

from .attribution import ImportanceVector, LrpConfig, METHODS
from .codebook import Codebook, Explanation
from .fuzzifier import Codeword, FuzzConfig, TruthVector
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = [
    "Codebook",
    "Codeword",
    "Explanation",
    "FuzzConfig",
    "ImportanceVector",
    "KERNEL_BACKEND",
    "LrpConfig",
    "METHODS",
    "TruthVector",
    "__version__",
]
