"""Fidelity measurement: how often the fuzzy explainer reproduces the
black box's decision, plus per-sample reports pairing the black box's
softmax confidence with the explainer's truth value."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import attribution, codebook as codebook_mod
from .codebook import check_compatible, classify, explain
from .errors import NoExplanationError
from .fuzzifier import FuzzConfig, fuzzify
from .nnet import forward

FIDELITY_COLUMNS = (
    "method",
    "dataset",
    "n",
    "matches",
    "p",
    "ties",
    "abstentions",
    "bb_accuracy",
    "explainer_accuracy",
)


@dataclass
class FidelityReport:
    method: str
    dataset: str
    n: int
    matches: int
    p: float
    ties: int
    abstentions: int
    no_explanation: int
    bb_accuracy: float | None
    explainer_accuracy: float | None
    match_flags: list = field(default_factory=list, repr=False)


@dataclass
class SampleReport:
    sample_id: int
    blackbox_class: int
    confidence: float
    explainer_class: int | None
    explainer_truth: float | None
    match: bool
    explanation: codebook_mod.Explanation | None
    no_explanation: bool
    abstained: bool
    feature_rows: list  # (index, importance, truth, symbol, feature_truth|None)
    ground_truth: int | None = None


def _attribute_sample(model, image, method, cfg, lrp):
    trace = forward(model, image)
    iv = attribution.compute(method, model, trace, lrp)
    tv, own = fuzzify(iv, cfg)
    return trace, iv, tv, own


def fidelity(model, book, images, labels=None, cfg=None, dataset="test", lrp=None):
    """Success rate over a test set: fraction of samples where the
    explainer's class equals the black box's. Abstentions (degenerate or
    all-X samples) count as non-matches and are tallied separately."""

    cfg = cfg or FuzzConfig(delta=book.meta.delta)
    check_compatible(book, model, cfg=cfg)
    n = len(images)
    if n == 0:
        raise ValueError("empty test set")
    method = book.meta.method
    matches = 0
    ties = 0
    abstentions = 0
    no_expl = 0
    bb_correct = 0
    ex_correct = 0
    flags = []
    for i in range(n):
        trace, iv, tv, own = _attribute_sample(model, images[i], method, cfg, lrp)
        m_bb = trace.predicted_class
        if labels is not None and m_bb == int(labels[i]):
            bb_correct += 1
        if not book.classes[m_bb]:
            no_expl += 1
        if tv.degenerate or own.is_all_x:
            abstentions += 1
            flags.append(0)
            continue
        m_ex, expl = classify(book, tv, raw_importance=iv.values)
        if expl.tied_count > 1:
            ties += 1
        delta_flag = 1 if m_ex == m_bb else 0
        matches += delta_flag
        flags.append(delta_flag)
        if labels is not None and m_ex == int(labels[i]):
            ex_correct += 1
    return FidelityReport(
        method=method,
        dataset=dataset,
        n=n,
        matches=matches,
        p=matches / n,
        ties=ties,
        abstentions=abstentions,
        no_explanation=no_expl,
        bb_accuracy=None if labels is None else bb_correct / n,
        explainer_accuracy=None if labels is None else ex_correct / n,
        match_flags=flags,
    )


def method_sweep(
    model,
    train_images,
    train_labels,
    test_images,
    test_labels,
    methods=attribution.METHODS,
    cfg=FuzzConfig(),
    lrp=None,
    label_source="blackbox",
    dataset="test",
    log=None,
):
    """One codebook + one fidelity row per method."""
    reports = []
    books = {}
    for method in methods:
        book = codebook_mod.build(
            model,
            train_images,
            train_labels,
            method=method,
            cfg=cfg,
            lrp=lrp,
            label_source=label_source,
        )
        rep = fidelity(model, book, test_images, test_labels, cfg=cfg, dataset=dataset, lrp=lrp)
        reports.append(rep)
        books[method] = book
        if log:
            log(f"{method}: p={rep.p:.4f} ({rep.matches}/{rep.n})")
    return reports, books


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_fidelity_csv(reports, path):
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FIDELITY_COLUMNS)
        for r in reports:
            writer.writerow(
                [
                    r.method,
                    r.dataset,
                    r.n,
                    r.matches,
                    _fmt(r.p),
                    r.ties,
                    r.abstentions,
                    _fmt(r.bb_accuracy),
                    _fmt(r.explainer_accuracy),
                ]
            )


def sample_report(model, book, image, sample_id=0, label=None, cfg=None, lrp=None):
    """Full per-sample view: black-box class + confidence, explainer class
    + truth, the explanation payload for the black box's class, and the
    per-feature (importance, truth, symbol, component truth) table."""

    cfg = cfg or FuzzConfig(delta=book.meta.delta)
    check_compatible(book, model, cfg=cfg)
    trace, iv, tv, own = _attribute_sample(model, image, book.meta.method, cfg, lrp)
    m_bb = trace.predicted_class
    confidence = float(trace.confidences[m_bb])
    abstained = tv.degenerate or own.is_all_x

    explainer_class = None
    explainer_truth = None
    expl = None
    no_explanation = False
    if not abstained:
        explainer_class, _ = classify(book, tv, raw_importance=iv.values)
        try:
            expl = explain(book, tv, m_bb, raw_importance=iv.values)
            explainer_truth = expl.truth
        except NoExplanationError:
            no_explanation = True
    else:
        no_explanation = True

    rows = []
    symbols = expl.codeword.symbols if expl is not None else "X" * model.feature_dim
    for i in range(model.feature_dim):
        ch = symbols[i]
        t = expl.component_truths.get(i) if expl is not None else None
        rows.append((i, float(iv.values[i]), float(tv.values[i]), ch, t))
    return SampleReport(
        sample_id=sample_id,
        blackbox_class=m_bb,
        confidence=confidence,
        explainer_class=explainer_class,
        explainer_truth=explainer_truth,
        match=explainer_class == m_bb,
        explanation=expl,
        no_explanation=no_explanation,
        abstained=abstained,
        feature_rows=rows,
        ground_truth=None if label is None else int(label),
    )


def sample_report_json(report):
    expl = report.explanation
    payload = {
        "sample_id": report.sample_id,
        "blackbox": {"class": report.blackbox_class, "confidence": report.confidence},
        "explainer": {"class": report.explainer_class, "truth": report.explainer_truth},
        "match": bool(report.match),
        "abstained": report.abstained,
        "no_explanation": report.no_explanation,
        "ground_truth": report.ground_truth,
        "explanation": None
        if expl is None
        else {
            "class": expl.winning_class,
            "codeword": expl.codeword.symbols,
            "truth": expl.truth,
            "component_truths": {str(i): t for i, t in sorted(expl.component_truths.items())},
            "tied_count": expl.tied_count,
            "tied_classes": list(expl.tied_classes),
        },
    }
    return json.dumps(payload, sort_keys=True, indent=2)


def write_feature_csv(report, path):
    """Flat per-feature table for external bar-chart plotting."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["feature_index", "importance", "truth", "symbol", "feature_truth"])
        for idx, imp, truth, symbol, ft in report.feature_rows:
            writer.writerow([idx, _fmt(imp), _fmt(truth), symbol, _fmt(ft)])
