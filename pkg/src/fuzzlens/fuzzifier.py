"""Importance -> truth values -> ternary codeword.

Min-max normalisation maps a sample's M importance scores into [0,1];
a band of half-width delta around 1/2 is read as "irrelevant" (symbol X),
values above it as "must be present" (1), below as "must be absent" (0).
Band boundaries fall into X. Truth of a codeword against a truth vector
is the Zadeh min over its non-X positions."""

from dataclasses import dataclass

import numpy as np

from . import kernels

SYMBOL_ABSENT = "0"
SYMBOL_PRESENT = "1"
SYMBOL_IRRELEVANT = "X"

_CHAR_FOR_CODE = np.frombuffer(b"01X", dtype=np.uint8)
_CODE_FOR_CHAR = {SYMBOL_ABSENT: 0, SYMBOL_PRESENT: 1, SYMBOL_IRRELEVANT: 2}
# lexicographic rank with '0' < 'X' < '1', used by the tie policy
_LEX_RANK = {SYMBOL_ABSENT: 0, SYMBOL_IRRELEVANT: 1, SYMBOL_PRESENT: 2}


@dataclass(frozen=True)
class FuzzConfig:
    """delta is the irrelevance half-width; [1/2-delta, 1/2+delta] -> X."""

    delta: float = 1.0 / 6.0

    def __post_init__(self):
        if not 0.0 <= self.delta < 0.5:
            raise ValueError(f"delta must be in [0, 0.5), got {self.delta}")

    @property
    def lower(self):
        return 0.5 - self.delta

    @property
    def upper(self):
        return 0.5 + self.delta


@dataclass
class TruthVector:
    """Per-feature truth degrees in [0,1]; degenerate marks a sample whose
    importances were all equal (forced to all-1/2)."""

    values: np.ndarray
    degenerate: bool = False

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class Codeword:
    symbols: str
    class_label: int | None = None

    def __post_init__(self):
        bad = set(self.symbols) - {"0", "1", "X"}
        if bad:
            raise ValueError(f"codeword contains {sorted(bad)}; alphabet is 0/X/1")

    def __len__(self):
        return len(self.symbols)

    @property
    def is_all_x(self):
        return set(self.symbols) <= {"X"}

    @property
    def non_x_count(self):
        return len(self.symbols) - self.symbols.count("X")

    def codes(self):
        """uint8 view: 0 -> absent, 1 -> present, 2 -> irrelevant."""
        raw = np.frombuffer(self.symbols.encode("ascii"), dtype=np.uint8)
        out = np.full(len(raw), 2, dtype=np.uint8)
        out[raw == ord("0")] = 0
        out[raw == ord("1")] = 1
        return out

    def lex_key(self):
        return tuple(_LEX_RANK[ch] for ch in self.symbols)


def codeword_from_codes(codes, class_label=None):
    symbols = _CHAR_FOR_CODE[np.asarray(codes, dtype=np.uint8)].tobytes().decode("ascii")
    return Codeword(symbols, class_label)


def normalize(importance):
    """Min-max normalisation of one importance vector.

    The minimum maps to exactly 0 and the maximum to exactly 1; order is
    preserved. A constant vector cannot be normalised: it comes back as
    all-1/2 with the degenerate flag set."""

    values = importance.values if hasattr(importance, "values") else importance
    y = np.asarray(values, dtype=np.float64)
    if y.ndim != 1 or len(y) < 2:
        raise ValueError(f"need a flat vector of at least 2 importances, got shape {y.shape}")
    lo, hi = y.min(), y.max()
    if hi == lo:
        return TruthVector(np.full(len(y), 0.5), degenerate=True)
    return TruthVector((y - lo) / (hi - lo))


def categorize(truth, cfg=FuzzConfig()):
    """Ternary relevance symbols; band boundaries are inclusive into X."""
    v = truth.values if isinstance(truth, TruthVector) else np.asarray(truth, dtype=np.float64)
    codes = np.full(len(v), 2, dtype=np.uint8)
    codes[v > cfg.upper] = 1
    codes[v < cfg.lower] = 0
    return codeword_from_codes(codes)


def feature_truth(truth_value, symbol):
    """Truth of "feature is relevant as stated": value for '1',
    complement for '0'. Irrelevant features carry no truth value."""
    if symbol == SYMBOL_PRESENT:
        return float(truth_value)
    if symbol == SYMBOL_ABSENT:
        return 1.0 - float(truth_value)
    raise ValueError("irrelevant (X) features have no truth value")


def codeword_truth(truth, codeword):
    """Zadeh min of the non-X feature truths; 1.0 (vacuous) when all-X."""
    v = truth.values if isinstance(truth, TruthVector) else np.asarray(truth, dtype=np.float64)
    if len(v) != len(codeword):
        raise ValueError(f"length mismatch: truth {len(v)} vs codeword {len(codeword)}")
    return float(kernels.codeword_truths(codeword.codes()[None, :], v)[0])


def fuzzify(importance, cfg=FuzzConfig()):
    """normalize then categorize; a degenerate sample yields an all-X
    codeword and the flag rides along on the TruthVector."""
    truth = normalize(importance)
    return truth, categorize(truth, cfg)
