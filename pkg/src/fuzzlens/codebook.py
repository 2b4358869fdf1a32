"""Per-class codeword sets harvested from training samples, and the
explainable classification on top of them.

Classification scores every stored codeword against the sample's truth
vector (Zadeh min over non-X positions) and takes the argmax; explanation
does the same restricted to one class. Ties are broken deterministically:
highest truth, then most non-X symbols (most specific), then lowest class
index, then lexicographic order with '0' < 'X' < '1'. Ties are counted
and reported, never hidden."""

from dataclasses import dataclass, replace

import numpy as np

from . import attribution, kernels
from .errors import (
    CodebookFormatError,
    EmptyCodebookError,
    MetadataMismatchError,
    NoExplanationError,
)
from .fuzzifier import Codeword, FuzzConfig, TruthVector, feature_truth, fuzzify
from .nnet import forward

LABEL_SOURCES = ("blackbox", "groundtruth")

_LEX_TABLE = str.maketrans({"0": "\x00", "X": "\x01", "1": "\x02"})


@dataclass
class CodebookMeta:
    method: str
    delta: float
    feature_dim: int
    num_classes: int
    label_source: str = "blackbox"
    samples_seen: int = 0
    skipped_all_x: int = 0
    skipped_degenerate: int = 0


@dataclass
class Explanation:
    """One classification/explanation outcome, with everything a report
    needs: the chosen codeword, its truth, the per-feature truths of its
    non-X components, and the underlying truth/importance values."""

    winning_class: int
    codeword: Codeword
    truth: float
    component_truths: dict[int, float]
    truth_values: np.ndarray
    raw_importance: np.ndarray | None = None
    tied_count: int = 1
    tied_classes: tuple[int, ...] = ()


class Codebook:
    """Immutable after build; classify/explain are read-only."""

    def __init__(self, meta):
        self.meta = meta
        self.classes = [dict() for _ in range(meta.num_classes)]  # symbols -> count
        self._cache = None

    def add(self, class_label, symbols, count=1):
        if not 0 <= class_label < self.meta.num_classes:
            raise ValueError(f"class {class_label} outside 0..{self.meta.num_classes - 1}")
        if len(symbols) != self.meta.feature_dim:
            raise ValueError(
                f"codeword length {len(symbols)} != feature_dim {self.meta.feature_dim}"
            )
        bucket = self.classes[class_label]
        bucket[symbols] = bucket.get(symbols, 0) + count
        self._cache = None

    def __len__(self):
        return sum(len(bucket) for bucket in self.classes)

    def class_counts(self):
        return [len(bucket) for bucket in self.classes]

    def collisions(self):
        """Distinct codewords observed under more than one class."""
        seen = {}
        for bucket in self.classes:
            for symbols in bucket:
                seen[symbols] = seen.get(symbols, 0) + 1
        return sum(1 for n in seen.values() if n > 1)

    def _materialized(self):
        """Stacked uint8 codes plus per-row class/tie-break data, sorted by
        (class, symbols) so evaluation order is reproducible."""
        if self._cache is None:
            rows = []
            for cls, bucket in enumerate(self.classes):
                for symbols in sorted(bucket):
                    rows.append((cls, symbols))
            if rows:
                codes = np.stack([Codeword(s).codes() for _, s in rows])
                class_idx = np.array([c for c, _ in rows], dtype=np.int64)
            else:
                codes = np.zeros((0, self.meta.feature_dim), dtype=np.uint8)
                class_idx = np.zeros(0, dtype=np.int64)
            non_x = (codes != 2).sum(axis=1)
            lex = [s.translate(_LEX_TABLE) for _, s in rows]
            self._cache = (codes, class_idx, [s for _, s in rows], non_x, lex)
        return self._cache


def _select_best(truths, class_idx, strings, non_x, lex):
    top = truths.max()
    tied = np.flatnonzero(truths == top)
    if len(tied) == 1:
        pick = int(tied[0])
    else:
        pick = int(min(tied, key=lambda i: (-int(non_x[i]), int(class_idx[i]), lex[i])))
    tied_classes = tuple(sorted({int(class_idx[i]) for i in tied}))
    return pick, len(tied), tied_classes


def _explanation(pick_class, symbols, truth, tv, raw, tied_count, tied_classes):
    components = {
        i: feature_truth(tv.values[i], ch) for i, ch in enumerate(symbols) if ch != "X"
    }
    return Explanation(
        winning_class=pick_class,
        codeword=Codeword(symbols, pick_class),
        truth=truth,
        component_truths=components,
        truth_values=tv.values,
        raw_importance=None if raw is None else np.asarray(raw, dtype=np.float64),
        tied_count=tied_count,
        tied_classes=tied_classes,
    )


def classify(codebook, truth, raw_importance=None):
    """Winning class over every stored codeword (argmax of Zadeh truth)."""
    tv = truth if isinstance(truth, TruthVector) else TruthVector(np.asarray(truth, float))
    if len(codebook) == 0:
        raise EmptyCodebookError("codebook holds no codewords")
    if len(tv.values) != codebook.meta.feature_dim:
        raise ValueError(
            f"truth length {len(tv.values)} != feature_dim {codebook.meta.feature_dim}"
        )
    codes, class_idx, strings, non_x, lex = codebook._materialized()
    truths = kernels.codeword_truths(codes, tv.values)
    pick, tied_count, tied_classes = _select_best(truths, class_idx, strings, non_x, lex)
    cls = int(class_idx[pick])
    expl = _explanation(
        cls, strings[pick], float(truths[pick]), tv, raw_importance, tied_count, tied_classes
    )
    return cls, expl


def explain(codebook, truth, blackbox_class, raw_importance=None):
    """Best codeword within the black box's own class."""
    tv = truth if isinstance(truth, TruthVector) else TruthVector(np.asarray(truth, float))
    if not 0 <= blackbox_class < codebook.meta.num_classes:
        raise ValueError(f"class {blackbox_class} outside 0..{codebook.meta.num_classes - 1}")
    if not codebook.classes[blackbox_class]:
        raise NoExplanationError(f"no codewords stored for class {blackbox_class}")
    codes, class_idx, strings, non_x, lex = codebook._materialized()
    mask = np.flatnonzero(class_idx == blackbox_class)
    truths = kernels.codeword_truths(codes[mask], tv.values)
    pick, tied_count, tied_classes = _select_best(
        truths, class_idx[mask], [strings[i] for i in mask], non_x[mask], [lex[i] for i in mask]
    )
    row = int(mask[pick])
    return _explanation(
        blackbox_class,
        strings[row],
        float(truths[pick]),
        tv,
        raw_importance,
        tied_count,
        tied_classes,
    )


def build(
    model,
    images,
    labels=None,
    method="deconvnet",
    cfg=FuzzConfig(),
    lrp=None,
    label_source="blackbox",
    include_all_x=False,
):
    """Harvest one codeword per training sample.

    Each sample is attributed toward the black box's own prediction; the
    codeword lands in the set of that predicted class (or of the ground
    truth label when label_source="groundtruth"). Degenerate samples are
    always skipped; all-X codewords are skipped unless requested, since
    they explain nothing and would dominate the argmax."""

    if label_source not in LABEL_SOURCES:
        raise ValueError(f"label_source must be one of {LABEL_SOURCES}")
    if label_source == "groundtruth" and labels is None:
        raise ValueError('label_source="groundtruth" needs labels')
    n = len(images)
    if n == 0:
        raise ValueError("empty training set")
    meta = CodebookMeta(
        method=method,
        delta=cfg.delta,
        feature_dim=model.feature_dim,
        num_classes=model.num_classes,
        label_source=label_source,
    )
    book = Codebook(meta)
    for i in range(n):
        trace = forward(model, images[i])
        iv = attribution.compute(method, model, trace, lrp)
        tv, cw = fuzzify(iv, cfg)
        meta.samples_seen += 1
        if tv.degenerate:
            meta.skipped_degenerate += 1
            continue
        if cw.is_all_x and not include_all_x:
            meta.skipped_all_x += 1
            continue
        cls = trace.predicted_class if label_source == "blackbox" else int(labels[i])
        book.add(cls, cw.symbols)
    return book


def merge(codebooks):
    """Union of per-class sets with observation counts summed; the inputs
    must agree on method, delta, M, N and label source."""
    if not codebooks:
        raise ValueError("nothing to merge")
    first = codebooks[0].meta
    merged = Codebook(replace(first))
    merged.meta.samples_seen = 0
    merged.meta.skipped_all_x = 0
    merged.meta.skipped_degenerate = 0
    for book in codebooks:
        m = book.meta
        same = (
            m.method == first.method
            and m.delta == first.delta
            and m.feature_dim == first.feature_dim
            and m.num_classes == first.num_classes
            and m.label_source == first.label_source
        )
        if not same:
            raise MetadataMismatchError(f"cannot merge codebooks: {m} vs {first}")
        merged.meta.samples_seen += m.samples_seen
        merged.meta.skipped_all_x += m.skipped_all_x
        merged.meta.skipped_degenerate += m.skipped_degenerate
        for cls, bucket in enumerate(book.classes):
            for symbols, count in bucket.items():
                merged.add(cls, symbols, count)
    return merged


MAGIC = "fuzzlens-codebook 1"


def save(codebook, path):
    """Line-oriented text file: header, '---', one record per codeword
    (class index, symbols, observation count), sorted for byte stability."""
    meta = codebook.meta
    lines = [
        MAGIC,
        f"method {meta.method}",
        f"delta {meta.delta!r}",
        f"feature_dim {meta.feature_dim}",
        f"num_classes {meta.num_classes}",
        f"label_source {meta.label_source}",
        f"samples_seen {meta.samples_seen}",
        f"skipped_all_x {meta.skipped_all_x}",
        f"skipped_degenerate {meta.skipped_degenerate}",
        f"collisions {codebook.collisions()}",
        f"codewords {len(codebook)}",
        "---",
    ]
    for cls, bucket in enumerate(codebook.classes):
        for symbols in sorted(bucket):
            lines.append(f"{cls} {symbols} {bucket[symbols]}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load(path):
    with open(path, encoding="ascii") as fh:
        text = fh.read()
    lines = text.splitlines()
    if not lines or lines[0] != MAGIC:
        raise CodebookFormatError(f"{path}: bad magic line {lines[:1]!r}")
    try:
        sep = lines.index("---")
    except ValueError:
        raise CodebookFormatError(f"{path}: missing '---' separator") from None
    header = {}
    for line in lines[1:sep]:
        key, _, value = line.partition(" ")
        header[key] = value
    try:
        meta = CodebookMeta(
            method=header["method"],
            delta=float(header["delta"]),
            feature_dim=int(header["feature_dim"]),
            num_classes=int(header["num_classes"]),
            label_source=header["label_source"],
            samples_seen=int(header["samples_seen"]),
            skipped_all_x=int(header["skipped_all_x"]),
            skipped_degenerate=int(header["skipped_degenerate"]),
        )
        declared_codewords = int(header["codewords"])
        declared_collisions = int(header["collisions"])
    except (KeyError, ValueError) as exc:
        raise CodebookFormatError(f"{path}: bad header: {exc}") from exc
    book = Codebook(meta)
    for line in lines[sep + 1 :]:
        if not line:
            continue
        parts = line.split(" ")
        if len(parts) != 3:
            raise CodebookFormatError(f"{path}: bad record {line!r}")
        cls, symbols, count = int(parts[0]), parts[1], int(parts[2])
        if len(symbols) != meta.feature_dim:
            raise CodebookFormatError(
                f"{path}: codeword length {len(symbols)} but header declares "
                f"feature_dim {meta.feature_dim}"
            )
        if symbols in book.classes[cls]:
            raise CodebookFormatError(f"{path}: duplicate record for class {cls}: {symbols}")
        book.add(cls, symbols, count)
    if len(book) != declared_codewords:
        raise CodebookFormatError(
            f"{path}: header declares {declared_codewords} codewords, found {len(book)}"
        )
    if book.collisions() != declared_collisions:
        raise CodebookFormatError(
            f"{path}: header declares {declared_collisions} collisions, "
            f"recomputed {book.collisions()}"
        )
    return book


def check_compatible(codebook, model, method=None, cfg=None):
    """Guard evaluation against mixed artifacts."""
    meta = codebook.meta
    if meta.feature_dim != model.feature_dim or meta.num_classes != model.num_classes:
        raise MetadataMismatchError(
            f"codebook is for M={meta.feature_dim}/N={meta.num_classes}, "
            f"model has M={model.feature_dim}/N={model.num_classes}"
        )
    if method is not None and meta.method != method:
        raise MetadataMismatchError(f"codebook was built with {meta.method!r}, not {method!r}")
    if cfg is not None and meta.delta != cfg.delta:
        raise MetadataMismatchError(f"codebook delta {meta.delta} != configured {cfg.delta}")
