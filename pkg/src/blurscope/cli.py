"""``blurscope`` command line: synth, calibrate, train, classify, evaluate, compare.

Exit codes: 0 success, 1 runtime or data failure, 2 usage error.  Machine
readable results go to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import cnn, evaluation, laplacian
from .errors import BlurscopeError, EmptyClass, InvertedCentres, SingleClassDataset
from .imageio import LABELS_CSV, load_image, read_labels_csv, synth_dataset

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SEED_ENV = "BLURSCOPE_SEED"


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"blurscope: {msg}", file=sys.stderr)


def _sigma_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if not 0 < lo <= hi:
        raise argparse.ArgumentTypeError(f"need 0 < lo <= hi, got {text!r}")
    return lo, hi


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _require_file(path: Path, what: str) -> None:
    if not path.is_file():
        raise UsageError(f"{what} not found: {path}")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# commands

def cmd_synth(args) -> int:
    if args.count < 2 or args.count % 2:
        raise UsageError(f"--count must be an even integer >= 2, got {args.count}")
    if args.size < 8:
        raise UsageError(f"--size must be at least 8, got {args.size}")
    lo, hi = args.sigma
    synth_dataset(args.seed, args.count, lo, hi, args.out, size=args.size)
    print(Path(args.out) / LABELS_CSV)
    return EXIT_OK


def _score_split(dataset):
    scored = laplacian.score_batch(dataset)
    blurry = [v for s, v in scored if s.label.value == "blurry"]
    sharp = [v for s, v in scored if s.label.value == "sharp"]
    return blurry, sharp


def cmd_calibrate(args) -> int:
    _require_file(args.labels, "labels CSV")
    dataset = read_labels_csv(args.labels)
    blurry, sharp = _score_split(dataset)
    try:
        model = laplacian.calibrate(blurry, sharp, args.weighting)
    except InvertedCentres as exc:
        _err(f"calibration failed: blurry centre {exc.centre_blurry!r} is not below "
             f"sharp centre {exc.centre_sharp!r}")
        return EXIT_FAIL
    except EmptyClass as exc:
        _err(f"calibration failed: {exc}")
        return EXIT_FAIL
    laplacian.save_threshold_model(model, args.out)
    print(f"threshold\t{_fmt(model.threshold)}")
    print(f"centre_blurry\t{_fmt(model.centre_blurry)}")
    print(f"centre_sharp\t{_fmt(model.centre_sharp)}")
    return EXIT_OK


def cmd_train(args) -> int:
    _require_file(args.labels, "labels CSV")
    config = cnn.TrainConfig(
        epochs=args.epochs, learning_rate=args.lr, batch_size=args.batch, seed=args.seed
    )
    dataset = read_labels_csv(args.labels)
    split = evaluation.split_dataset(dataset, 0.8, args.seed)

    def show(stats):
        print(f"epoch\t{stats.epoch}\tloss\t{stats.mean_loss:.6f}\taccuracy\t{stats.train_accuracy:.4f}",
              flush=True)

    try:
        model = cnn.train(split.train, config, on_epoch=show)
    except SingleClassDataset as exc:
        _err(f"training failed: {exc}")
        return EXIT_FAIL
    cnn.save_model(model, args.out)
    try:
        report = evaluation.evaluate(
            evaluation.cnn_classifier(model), split.validation, evaluation.Method.CNN,
            dataset_id=f"{args.labels}#validation",
        )
    except SingleClassDataset:
        _err("validation split lacks one of the classes; no validation metrics")
        return EXIT_OK
    print(evaluation.format_report(report))
    if args.report is not None:
        report.save(args.report)
    return EXIT_OK


def _load_classifier(method: str, model_path):
    if method == "oracle":
        return evaluation.oracle_classifier
    if model_path is None:
        raise UsageError(f"--model is required for method {method}")
    _require_file(model_path, "model file")
    if method == "laplacian":
        return evaluation.laplacian_classifier(laplacian.load_threshold_model(model_path))
    return evaluation.cnn_classifier(cnn.load_model(model_path))


def cmd_classify(args) -> int:
    if args.model is None:
        raise UsageError("--model is required")
    _require_file(args.model, "model file")
    if args.method == "laplacian":
        model = laplacian.load_threshold_model(args.model)

        def judge(img):
            score = laplacian.laplacian_variance(img)
            return score, laplacian.classify_score(score, model)
    else:
        model = cnn.load_model(args.model)

        def judge(img):
            return cnn.predict(model, img)

    status = EXIT_OK
    for path in args.images:
        try:
            score, label = judge(load_image(path))
        except (OSError, BlurscopeError) as exc:
            _err(f"{path}: {exc}")
            status = EXIT_FAIL
            continue
        print(f"{path}\t{_fmt(score)}\t{label.value}", flush=True)
    return status


def _run_evaluation(method, classifier, labels_path):
    dataset = read_labels_csv(labels_path)
    return evaluation.evaluate(classifier, dataset, method, dataset_id=str(labels_path))


def cmd_evaluate(args) -> int:
    _require_file(args.labels, "labels CSV")
    classifier = _load_classifier(args.method, args.model)
    try:
        report = _run_evaluation(args.method, classifier, args.labels)
    except SingleClassDataset as exc:
        _err(f"evaluation failed: {exc}")
        return EXIT_FAIL
    assert report.is_consistent()
    print(evaluation.format_report(report))
    if args.out is not None:
        report.save(args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    _require_file(args.labels, "labels CSV")
    if args.oracle:
        lap_cls = cnn_cls = evaluation.oracle_classifier
    else:
        if args.threshold is None or args.model is None:
            raise UsageError("compare needs both --threshold and --model")
        lap_cls = _load_classifier("laplacian", args.threshold)
        cnn_cls = _load_classifier("cnn", args.model)
    try:
        lap = _run_evaluation("laplacian", lap_cls, args.labels)
        net = _run_evaluation("cnn", cnn_cls, args.labels)
    except SingleClassDataset as exc:
        _err(f"evaluation failed: {exc}")
        return EXIT_FAIL
    print(evaluation.format_comparison(lap, net))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blurscope",
        description="Blur detection by variance of Laplacian or a small CNN.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", help="generate a labelled synthetic corpus")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--count", type=int, required=True, help="number of images (even)")
    p.add_argument("--sigma", type=_sigma_range, default=(2.0, 4.0), metavar="LO:HI",
                   help="blur sigma range (default 2:4)")
    p.add_argument("--size", type=int, default=64, help="image side in pixels")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("calibrate", help="fit the Laplacian threshold")
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="threshold JSON")
    p.add_argument("--weighting", choices=["count", "midpoint"], default="count")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("train", help="train the CNN on an 80%% split")
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="model file")
    p.add_argument("--epochs", type=_positive_int, default=30)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--lr", type=_positive_float, default=0.05)
    p.add_argument("--batch", type=_positive_int, default=16)
    p.add_argument("--report", type=Path, default=None, help="validation report JSON")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="print a verdict per image")
    p.add_argument("--method", choices=["laplacian", "cnn"], required=True)
    p.add_argument("--model", type=Path, help="threshold JSON or model file")
    p.add_argument("images", nargs="+")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="confusion matrix and metrics on a labelled set")
    p.add_argument("--method", choices=["laplacian", "cnn", "oracle"], required=True,
                   help="laplacian or cnn")
    p.add_argument("--model", type=Path, help="threshold JSON or model file")
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="report JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="evaluate both methods side by side")
    p.add_argument("--threshold", type=Path, help="Laplacian threshold JSON")
    p.add_argument("--model", type=Path, help="CNN model file")
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--oracle", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        return args.func(args)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (OSError, BlurscopeError, ValueError) as exc:
        _err(str(exc))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
