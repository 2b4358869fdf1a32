"""Fidelity accounting: the match rate, abstention/tie tallies, CSV
shape, and per-sample reports."""

import csv

import numpy as np
import pytest

from fuzzlens import codebook as cb
from fuzzlens import evaluation
from fuzzlens.codebook import Codebook, CodebookMeta
from fuzzlens.errors import MetadataMismatchError
from fuzzlens.fuzzifier import FuzzConfig
from fuzzlens.nnet import LayerSpec, Model, desk_model


def passthrough_model():
    """Black box = argmax of the 2 inputs; features = the inputs."""
    return Model(
        layers=[LayerSpec("dense", weights=np.eye(2))],
        input_shape=(2,),
        feature_layer_index=0,
        num_classes=2,
        feature_dim=2,
    )


def book_for(entries, m=2, n=2, method="raw", delta=1 / 6):
    book = Codebook(CodebookMeta(method=method, delta=delta, feature_dim=m, num_classes=n))
    for cls, symbols in entries:
        book.add(cls, symbols)
    return book


def test_fidelity_all_match():
    model = passthrough_model()
    book = book_for([(0, "10"), (1, "01")])
    images = np.array([[2.0, 1.0], [1.0, 3.0], [5.0, 0.0], [0.0, 1.0]])
    labels = np.array([0, 1, 0, 1])
    rep = evaluation.fidelity(model, book, images, labels)
    assert rep.p == 1.0
    assert rep.matches == rep.n == 4
    assert rep.abstentions == 0
    assert rep.bb_accuracy == 1.0
    assert rep.explainer_accuracy == 1.0


def test_fidelity_three_of_four():
    model = passthrough_model()
    book = book_for([(0, "10")])  # explainer can only ever answer class 0
    images = np.array([[2.0, 1.0], [3.0, 1.0], [4.0, 2.0], [1.0, 2.0]])
    labels = np.array([0, 0, 0, 1])
    rep = evaluation.fidelity(model, book, images, labels)
    assert rep.matches == 3
    assert rep.p == 0.75
    assert rep.no_explanation == 1  # the class-1 sample has an empty bucket


def test_fidelity_recomputed_from_flags_bit_exact():
    model = desk_model(seed=41)
    rng = np.random.default_rng(42)
    images = rng.uniform(size=(20, 1, 28, 28))
    labels = rng.integers(0, 10, size=20)
    book = cb.build(model, images, method="deconvnet", cfg=FuzzConfig())
    rep = evaluation.fidelity(model, book, images, labels)
    assert rep.p == sum(rep.match_flags) / rep.n
    assert len(rep.match_flags) == rep.n


def test_fidelity_abstentions_counted_as_non_matches():
    model = passthrough_model()
    book = book_for([(0, "10"), (1, "01")])
    images = np.array([[2.0, 1.0], [3.0, 3.0]])  # second is degenerate (equal importances)
    labels = np.array([0, 0])
    rep = evaluation.fidelity(model, book, images, labels)
    assert rep.abstentions == 1
    assert rep.matches == 1
    assert rep.p == 0.5


def test_fidelity_tie_tally():
    model = passthrough_model()
    book = book_for([(0, "1X"), (1, "11")])
    images = np.array([[4.0, 0.0]])  # truth (1, 0): "1X" -> 1.0, "11" -> 0.0
    rep = evaluation.fidelity(model, book, images)
    assert rep.ties == 0
    book2 = book_for([(0, "1X"), (1, "10")])  # both reach min(1.0[,1.0]) = 1.0
    rep2 = evaluation.fidelity(model, book2, images)
    assert rep2.ties == 1


def test_fidelity_rejects_empty_and_mismatched():
    model = passthrough_model()
    book = book_for([(0, "10")])
    with pytest.raises(ValueError):
        evaluation.fidelity(model, book, np.zeros((0, 2)))
    wrong = book_for([(0, "10X")], m=3)
    with pytest.raises(MetadataMismatchError):
        evaluation.fidelity(model, wrong, np.array([[1.0, 0.0]]))


def test_fidelity_order_insensitive_reduction():
    model = desk_model(seed=43)
    rng = np.random.default_rng(44)
    images = rng.uniform(size=(16, 1, 28, 28))
    book = cb.build(model, images, method="saliency", cfg=FuzzConfig())
    a = evaluation.fidelity(model, book, images)
    b = evaluation.fidelity(model, book, images[::-1].copy())
    assert (a.matches, a.ties, a.abstentions, a.p) == (b.matches, b.ties, b.abstentions, b.p)


def test_method_sweep_single_method_equals_fidelity():
    model = desk_model(seed=45)
    rng = np.random.default_rng(46)
    train_images = rng.uniform(size=(10, 1, 28, 28))
    test_images = rng.uniform(size=(6, 1, 28, 28))
    test_labels = rng.integers(0, 10, size=6)
    reports, books = evaluation.method_sweep(
        model, train_images, None, test_images, test_labels, methods=("guided",)
    )
    assert len(reports) == 1 and reports[0].method == "guided"
    direct = evaluation.fidelity(model, books["guided"], test_images, test_labels)
    assert direct.p == reports[0].p
    assert direct.matches == reports[0].matches


def test_fidelity_csv_columns(tmp_path):
    model = passthrough_model()
    book = book_for([(0, "10"), (1, "01")])
    images = np.array([[2.0, 1.0], [1.0, 3.0]])
    labels = np.array([0, 1])
    rep = evaluation.fidelity(model, book, images, labels, dataset="toy")
    path = tmp_path / "fidelity.csv"
    evaluation.write_fidelity_csv([rep], path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(evaluation.FIDELITY_COLUMNS)
    assert rows[1][0] == "raw"
    assert rows[1][1] == "toy"
    assert rows[1][2] == "2"
    assert float(rows[1][4]) == rep.p


def test_sample_report_matched_case():
    model = passthrough_model()
    book = book_for([(0, "10"), (1, "01")])
    rep = evaluation.sample_report(model, book, np.array([3.0, 1.0]), sample_id=7, label=0)
    assert rep.blackbox_class == 0
    assert rep.explainer_class == 0
    assert rep.match
    assert 0.5 < rep.confidence <= 1.0
    assert rep.explainer_truth == rep.explanation.truth
    # t equals the min over listed component truths, recomputed here
    assert rep.explanation.truth == min(rep.explanation.component_truths.values())
    assert len(rep.feature_rows) == 2
    idx, imp, truth, symbol, ft = rep.feature_rows[0]
    assert (idx, symbol) == (0, "1")
    assert imp == 3.0 and truth == 1.0 and ft == 1.0


def test_sample_report_mismatch_shows_blackbox_class_payload():
    model = passthrough_model()
    # class-1 bucket exists but the global argmax lands on class 0
    book = book_for([(0, "1X"), (1, "11")])
    rep = evaluation.sample_report(model, book, np.array([1.0, 4.0]))
    assert rep.blackbox_class == 1
    # explanation payload is for the black box's class even on mismatch
    assert rep.explanation.winning_class == 1
    assert rep.explanation.codeword.symbols == "11"


def test_sample_report_degenerate_marked():
    model = passthrough_model()
    book = book_for([(0, "10")])
    rep = evaluation.sample_report(model, book, np.array([2.0, 2.0]))
    assert rep.abstained
    assert rep.no_explanation
    assert rep.explainer_class is None
    assert all(row[4] is None for row in rep.feature_rows)


def test_sample_report_json_and_feature_csv(tmp_path):
    model = passthrough_model()
    book = book_for([(0, "10"), (1, "01")])
    rep = evaluation.sample_report(model, book, np.array([3.0, 1.0]), sample_id=2, label=1)
    blob = evaluation.sample_report_json(rep)
    assert '"sample_id": 2' in blob
    assert '"codeword": "10"' in blob
    path = tmp_path / "features.csv"
    evaluation.write_feature_csv(rep, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["feature_index", "importance", "truth", "symbol", "feature_truth"]
    assert len(rows) == 3
    assert rows[1][3] == "1"
