"""Command line entry point orchestrating train -> attribute ->
build-codebook -> evaluate / explain / sweep.

Every subcommand writes its artifacts plus a run manifest (effective
config, seed, sha256 of each input file) into the output directory. Exit
codes: 0 ok, 2 config error, 3 data/format error, 4 missing prerequisite
artifact."""

import argparse
import hashlib
import json
import os
import sys

from . import codebook as codebook_mod
from . import evaluation, idx, synth
from .attribution import LrpConfig, METHODS
from .config import RunConfig, parse_config_file, resolve
from .errors import (
    CodebookFormatError,
    ConfigError,
    FuzzlensError,
    IdxError,
    MetadataMismatchError,
    ModelFormatError,
)
from .fuzzifier import FuzzConfig
from .nnet import TrainConfig, desk_model, load_model, save_model, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PREREQ = 4


class PrerequisiteMissing(FuzzlensError):
    def __init__(self, path, producer):
        super().__init__(f"missing {path}; produce it with `fuzzlens {producer}`")


def _require(path, producer):
    if not os.path.exists(path):
        raise PrerequisiteMissing(path, producer)
    return path


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir, stage, cfg, inputs, outputs):
    manifest = {
        "stage": stage,
        "seed": cfg.seed,
        "config": cfg.as_dict(),
        "inputs": {p: _sha256(p) for p in sorted(set(inputs))},
        "outputs": sorted(os.path.relpath(p, out_dir) for p in outputs),
    }
    path = os.path.join(out_dir, f"{stage}-manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _config_from_args(args):
    file_values = parse_config_file(args.config) if getattr(args, "config", None) else {}
    overrides = {}
    for key in (
        "seed",
        "delta",
        "lrp_epsilon",
        "epochs",
        "learning_rate",
        "momentum",
        "batch_size",
        "train_count",
        "test_count",
        "num_classes",
        "label_source",
        "methods",
    ):
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    if getattr(args, "method", None):
        overrides["methods"] = (args.method,)
    return resolve(file_values, overrides)


def _load_limited(images_path, labels_path, limit):
    source = idx.DatasetSource(images_path, labels_path, limit=limit)
    return idx.load_dataset(source)


def _out_dir(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_synth_data(args):
    cfg = _config_from_args(args)
    out = _out_dir(args)
    paths = synth.write_digits_idx(out, cfg.train_count, cfg.test_count, seed=cfg.seed)
    _write_manifest(out, "synth-data", cfg, [], list(paths.values()))
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_train(args):
    cfg = _config_from_args(args)
    out = _out_dir(args)
    images, labels = _load_limited(
        _require(args.train_images, "synth-data"),
        _require(args.train_labels, "synth-data"),
        cfg.train_count,
    )
    test_images = test_labels = None
    inputs = [args.train_images, args.train_labels]
    if args.test_images:
        test_images, test_labels = _load_limited(
            _require(args.test_images, "synth-data"),
            _require(args.test_labels, "synth-data"),
            cfg.test_count,
        )
        inputs += [args.test_images, args.test_labels]
    model = desk_model(
        num_classes=cfg.num_classes,
        input_shape=images.shape[1:],
        seed=cfg.seed,
    )
    tcfg = TrainConfig(
        epochs=cfg.epochs,
        learning_rate=cfg.learning_rate,
        momentum=cfg.momentum,
        batch_size=cfg.batch_size,
        seed=cfg.seed,
    )
    trained, report = train(
        model, images, labels, tcfg, test_images, test_labels, log=print
    )
    model_path = os.path.join(out, "model.fzm")
    save_model(trained, model_path)
    _write_manifest(out, "train", cfg, inputs, [model_path])
    print(f"train accuracy: {report.final_train_accuracy:.4f}")
    if report.test_accuracy is not None:
        print(f"test accuracy:  {report.test_accuracy:.4f}")
    print(f"model: {model_path}")
    return EXIT_OK


def cmd_attribute(args):
    from . import attribution
    from .nnet import forward

    cfg = _config_from_args(args)
    out = _out_dir(args)
    model = load_model(_require(args.model, "train"))
    images, _ = _load_limited(
        _require(args.images, "synth-data"),
        _require(args.labels, "synth-data"),
        args.count,
    )
    method = cfg.methods[0]
    lrp = LrpConfig(cfg.lrp_epsilon)
    path = os.path.join(out, f"attributions-{method}.jsonl")
    with open(path, "w") as fh:
        for i in range(len(images)):
            trace = forward(model, images[i])
            iv = attribution.compute(method, model, trace, lrp)
            fh.write(
                json.dumps(
                    {
                        "sample_id": i,
                        "method": method,
                        "target_class": iv.target_class,
                        "values": [repr(v) for v in iv.values.tolist()],
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    _write_manifest(out, "attribute", cfg, [args.model, args.images, args.labels], [path])
    print(f"attributions: {path}")
    return EXIT_OK


def cmd_build_codebook(args):
    cfg = _config_from_args(args)
    out = _out_dir(args)
    model = load_model(_require(args.model, "train"))
    images, labels = _load_limited(
        _require(args.images, "synth-data"),
        _require(args.labels, "synth-data"),
        cfg.train_count if args.count is None else args.count,
    )
    method = cfg.methods[0]
    book = codebook_mod.build(
        model,
        images,
        labels,
        method=method,
        cfg=FuzzConfig(cfg.delta),
        lrp=LrpConfig(cfg.lrp_epsilon),
        label_source=cfg.label_source,
    )
    path = os.path.join(out, f"codebook-{method}.fzc")
    codebook_mod.save(book, path)
    _write_manifest(out, "build-codebook", cfg, [args.model, args.images, args.labels], [path])
    print(
        f"codebook: {path} ({len(book)} codewords, "
        f"{book.collisions()} collisions, "
        f"{book.meta.skipped_all_x + book.meta.skipped_degenerate} skipped)"
    )
    return EXIT_OK


def cmd_evaluate(args):
    cfg = _config_from_args(args)
    out = _out_dir(args)
    model = load_model(_require(args.model, "train"))
    book = codebook_mod.load(_require(args.codebook, "build-codebook"))
    images, labels = _load_limited(
        _require(args.images, "synth-data"),
        _require(args.labels, "synth-data"),
        cfg.test_count if args.count is None else args.count,
    )
    report = evaluation.fidelity(
        model,
        book,
        images,
        labels,
        cfg=FuzzConfig(book.meta.delta),
        dataset=args.dataset_name,
        lrp=LrpConfig(cfg.lrp_epsilon),
    )
    path = os.path.join(out, "fidelity.csv")
    evaluation.write_fidelity_csv([report], path)
    _write_manifest(
        out, "evaluate", cfg, [args.model, args.codebook, args.images, args.labels], [path]
    )
    print(
        f"{report.method}: p={report.p:.4f} ({report.matches}/{report.n}), "
        f"ties={report.ties}, abstentions={report.abstentions}"
    )
    print(f"fidelity table: {path}")
    return EXIT_OK


def cmd_explain(args):
    cfg = _config_from_args(args)
    out = _out_dir(args)
    model = load_model(_require(args.model, "train"))
    book = codebook_mod.load(_require(args.codebook, "build-codebook"))
    images, labels = _load_limited(
        _require(args.images, "synth-data"),
        _require(args.labels, "synth-data"),
        None,
    )
    if not 0 <= args.sample < len(images):
        raise ConfigError(f"--sample {args.sample} outside 0..{len(images) - 1}")
    report = evaluation.sample_report(
        model,
        book,
        images[args.sample],
        sample_id=args.sample,
        label=labels[args.sample],
        cfg=FuzzConfig(book.meta.delta),
        lrp=LrpConfig(cfg.lrp_epsilon),
    )
    json_path = os.path.join(out, f"sample-{args.sample}.json")
    with open(json_path, "w") as fh:
        fh.write(evaluation.sample_report_json(report) + "\n")
    csv_path = os.path.join(out, f"sample-{args.sample}-features.csv")
    evaluation.write_feature_csv(report, csv_path)
    _write_manifest(
        out,
        "explain",
        cfg,
        [args.model, args.codebook, args.images, args.labels],
        [json_path, csv_path],
    )
    print(
        f"sample {args.sample}: blackbox={report.blackbox_class} "
        f"(confidence {report.confidence:.4f}), explainer={report.explainer_class} "
        f"(truth {report.explainer_truth if report.explainer_truth is None else round(report.explainer_truth, 4)})"
    )
    print(f"report: {json_path}")
    return EXIT_OK


def cmd_sweep(args):
    cfg = _config_from_args(args)
    out = _out_dir(args)
    model = load_model(_require(args.model, "train"))
    train_images, train_labels = _load_limited(
        _require(args.train_images, "synth-data"),
        _require(args.train_labels, "synth-data"),
        cfg.train_count,
    )
    test_images, test_labels = _load_limited(
        _require(args.test_images, "synth-data"),
        _require(args.test_labels, "synth-data"),
        cfg.test_count,
    )
    methods = cfg.methods if len(cfg.methods) > 1 or args.methods else METHODS
    reports, books = evaluation.method_sweep(
        model,
        train_images,
        train_labels,
        test_images,
        test_labels,
        methods=methods,
        cfg=FuzzConfig(cfg.delta),
        lrp=LrpConfig(cfg.lrp_epsilon),
        label_source=cfg.label_source,
        dataset=args.dataset_name,
        log=print,
    )
    csv_path = os.path.join(out, "fidelity.csv")
    evaluation.write_fidelity_csv(reports, csv_path)
    outputs = [csv_path]
    for method, book in books.items():
        book_path = os.path.join(out, f"codebook-{method}.fzc")
        codebook_mod.save(book, book_path)
        outputs.append(book_path)
    _write_manifest(
        out,
        "sweep",
        cfg,
        [args.model, args.train_images, args.train_labels, args.test_images, args.test_labels],
        outputs,
    )
    print(f"fidelity table: {csv_path}")
    return EXIT_OK


def _add_common(p):
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fuzzlens",
        description="Fuzzy-logic post-hoc explainer for small image classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="generate a synthetic digit dataset as IDX files")
    _add_common(p)
    p.add_argument("--train-count", type=int, default=None)
    p.add_argument("--test-count", type=int, default=None)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train", help="train the desk-scale CNN on an IDX dataset")
    _add_common(p)
    p.add_argument("--train-images", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--test-images")
    p.add_argument("--test-labels")
    p.add_argument("--train-count", type=int, default=None)
    p.add_argument("--test-count", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None, dest="learning_rate")
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--num-classes", type=int, default=None, dest="num_classes")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attribute", help="write per-sample importance records (JSONL)")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--method", choices=METHODS, default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--lrp-epsilon", type=float, default=None, dest="lrp_epsilon")
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("build-codebook", help="harvest per-class codewords from a training set")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--method", choices=METHODS, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--label-source", choices=("blackbox", "groundtruth"), default=None,
                   dest="label_source")
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--lrp-epsilon", type=float, default=None, dest="lrp_epsilon")
    p.set_defaults(func=cmd_build_codebook)

    p = sub.add_parser("evaluate", help="measure explainer/black-box matching rate")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--dataset-name", default="test")
    p.add_argument("--lrp-epsilon", type=float, default=None, dest="lrp_epsilon")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", help="full report for one sample")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--sample", type=int, required=True)
    p.add_argument("--lrp-epsilon", type=float, default=None, dest="lrp_epsilon")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("sweep", help="codebook + fidelity row for each method")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--train-images", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--test-images", required=True)
    p.add_argument("--test-labels", required=True)
    p.add_argument("--methods", default=None, help="comma-separated; default: all five")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--train-count", type=int, default=None)
    p.add_argument("--test-count", type=int, default=None)
    p.add_argument("--label-source", choices=("blackbox", "groundtruth"), default=None,
                   dest="label_source")
    p.add_argument("--lrp-epsilon", type=float, default=None, dest="lrp_epsilon")
    p.add_argument("--dataset-name", default="test")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PrerequisiteMissing as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PREREQ
    except (IdxError, ModelFormatError, CodebookFormatError, MetadataMismatchError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FuzzlensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
