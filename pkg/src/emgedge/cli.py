"""Command-line entry point: ``emgedge {synth,features,train,eval,export,stream}``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .dataio import (Class, SessionFormatError, SynthConfig, dataset_to_csv, parse_session_csv,
                     segment_windows, session_to_csv, synth_dataset, synth_session)
from .deploy import FlatFormatError, FlatModel, codegen, flatten, run_stream, trace_csv, transitions
from .deploy.stream import horizon_to_k
from .evaluation import SplitSpec, evaluate, kfold_cv, stratified_split_indices
from .features import feature_matrix, feature_table_csv, mel_spectrogram
from .models import (EnsembleModel, ForestConfig, GbtConfig, LogRegConfig, ModelFormatError,
                     fit_threshold, fit_variance, load_model, save_model, train_forest, train_gbt,
                     train_knn, train_logreg, train_pca_logreg)
from .models.serialize import MAGIC as CONTAINER_MAGIC

MODEL_KINDS = ("threshold", "variance", "logreg", "knn", "pca-logreg", "forest", "gbt", "ensemble")


class CliError(Exception):
    pass


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _read_dataset(path: str):
    session = parse_session_csv(Path(path).read_text(encoding="utf-8"))
    return session, segment_windows(session, source=str(path))


def make_trainer(kind: str, args):
    seed = args.seed
    depth = args.max_depth

    def forest(X, y):
        return train_forest(X, y, ForestConfig(n_trees=args.trees, seed=seed, max_depth=depth,
                                               n_jobs=args.jobs))

    def gbt(X, y):
        return train_gbt(X, y, GbtConfig(n_rounds=args.rounds, max_depth=depth or 3))

    trainers = {
        "threshold": fit_threshold,
        "variance": fit_variance,
        "logreg": lambda X, y: train_logreg(X, y, LogRegConfig()),
        "knn": lambda X, y: train_knn(X, y, k=args.k),
        "pca-logreg": lambda X, y: train_pca_logreg(X, y),
        "forest": forest,
        "gbt": gbt,
        "ensemble": lambda X, y: EnsembleModel([forest(X, y), gbt(X, y), train_logreg(X, y)]),
    }
    return trainers[kind]


def load_any_model(path: str):
    data = Path(path).read_bytes()
    if data[:4] == CONTAINER_MAGIC:
        return load_model(data)
    return FlatModel.from_bytes(data)


# ----------------------------------------------------------------- subcommands

def cmd_synth(args) -> int:
    cfg = SynthConfig(n_windows_per_class=args.per_class, seed=args.seed)
    if args.cycles:
        session = synth_session(cfg, n_cycles=args.cycles)
        text = session_to_csv(session)
        counts = {c: int(np.sum(session.labels == c)) // 1000 for c in Class}
    else:
        ds = synth_dataset(cfg)
        text = dataset_to_csv(ds)
        counts = ds.class_counts()
    Path(args.output).write_text(text, encoding="utf-8", newline="\n")
    print(f"wrote {args.output}: " + ", ".join(f"{c.name}={n}" for c, n in counts.items()) + " windows")
    return 0


def cmd_features(args) -> int:
    _, ds = _read_dataset(args.data)
    X = feature_matrix(ds)
    Path(args.output).write_text(feature_table_csv(X, ds.labels()), encoding="utf-8", newline="\n")
    print(f"wrote {len(X)} feature rows to {args.output}")
    if args.spectrograms:
        out = Path(args.spectrograms)
        out.mkdir(parents=True, exist_ok=True)
        for i, w in enumerate(ds.windows[: args.limit]):
            spec = mel_spectrogram(w)
            stem = f"window{i:05d}_{w.label.name.lower()}"
            (out / f"{stem}.csv").write_text(spec.to_csv(), encoding="utf-8", newline="\n")
            (out / f"{stem}.pgm").write_bytes(spec.to_pgm())
        print(f"wrote {min(args.limit, len(ds))} spectrograms to {out}")
    return 0


def cmd_train(args) -> int:
    _, ds = _read_dataset(args.data)
    X, y = feature_matrix(ds), ds.labels()
    missing = [c.name for c in Class if not np.any(y == c)]
    if missing:
        raise CliError(f"degenerate dataset: no windows for {', '.join(missing)}")
    spec = SplitSpec(test_fraction=args.test_fraction, folds=args.cv or 5, seed=args.seed)
    trainer = make_trainer(args.model, args)
    if args.model in ("threshold", "variance"):
        print("warning: binary heuristic; NOISE is never predicted")
    if args.cv:
        cv = kfold_cv(X, y, spec, trainer)
        print(f"{args.cv}-fold cross-validation ({args.model})")
        print(cv.summary())
    train, test = stratified_split_indices(y, spec)
    model = trainer(X[train], y[train])
    report = evaluate(model, X[test], y[test])
    print(f"held-out evaluation ({args.model}, {len(train)} train / {len(test)} test windows)")
    print(report.confusion.to_text())
    print(report.to_text())
    if args.output:
        blob = flatten(model).to_bytes() if args.model == "forest" else save_model(model)
        Path(args.output).write_bytes(blob)
        print(f"saved {args.model} model to {args.output} ({len(blob)} bytes)")
    return 0


def cmd_eval(args) -> int:
    model = load_any_model(args.model_file)
    _, ds = _read_dataset(args.data)
    X, y = feature_matrix(ds), ds.labels()
    if args.held_out:
        _, test = stratified_split_indices(y, SplitSpec(args.test_fraction, seed=args.seed))
        X, y = X[test], y[test]
    report = evaluate(model, X, y)
    print(report.confusion.to_text())
    print(report.to_text())
    if args.json:
        print(report.to_json())
    return 0


def cmd_export(args) -> int:
    try:
        fm = FlatModel.from_bytes(Path(args.model_file).read_bytes())
    except FlatFormatError as exc:
        raise CliError(f"corrupt model file {args.model_file}: {exc}") from exc
    out = codegen(fm)
    Path(args.output).write_text(out.source_text, encoding="utf-8", newline="\n")
    print(f"wrote {args.output}")
    print(f"nodes: {out.node_count}")
    print(f"est flash: {out.est_flash_bytes} bytes")
    print(f"est ram: {out.est_ram_bytes} bytes")
    return 0


def cmd_stream(args) -> int:
    session = parse_session_csv(Path(args.data).read_text(encoding="utf-8"))
    model = load_any_model(args.model_file)
    k = horizon_to_k(args.stride_ms, args.horizon_ms)
    steps = run_stream(session, model, args.stride_ms, args.horizon_ms)
    Path(args.output).write_text(trace_csv(steps), encoding="utf-8", newline="\n")
    print(f"k={k} ({args.horizon_ms} ms horizon / {args.stride_ms} ms stride)")
    print(f"steps: {len(steps)}")
    print(f"raw transitions: {transitions([s.raw for s in steps])}")
    print(f"smoothed transitions: {transitions([s.smoothed for s in steps])}")
    return 0


# ---------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="emgedge", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic three-class session CSV")
    s.add_argument("--per-class", type=_positive_int, default=100, help="windows per class (default 100)")
    s.add_argument("--cycles", type=_positive_int, default=None,
                   help="instead write N protocol cycles of 5 s RELAX/CLENCH/NOISE")
    s.add_argument("--seed", type=int, default=1738)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("features", help="export the MAV/SD/MAX/ZCR table and optional spectrograms")
    s.add_argument("data")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--spectrograms", metavar="DIR", help="also write mel spectrogram CSV + PGM files")
    s.add_argument("--limit", type=_positive_int, default=10, help="spectrograms to write (default 10)")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("train", help="train a model, report held-out metrics, save it")
    s.add_argument("data")
    s.add_argument("--model", choices=MODEL_KINDS, default="forest")
    s.add_argument("--seed", type=int, default=1738)
    s.add_argument("--trees", type=_positive_int, default=100, help="forest size (default 100)")
    s.add_argument("--max-depth", type=_positive_int, default=None,
                   help="tree depth cap (forest: unbounded; gbt: 3)")
    s.add_argument("--rounds", type=_positive_int, default=50, help="boosting rounds (default 50)")
    s.add_argument("--k", type=_positive_int, default=5, help="KNN neighbours (default 5)")
    s.add_argument("--cv", type=int, default=None, metavar="FOLDS", help="also run stratified k-fold CV")
    s.add_argument("--test-fraction", type=float, default=0.2)
    s.add_argument("--jobs", type=_positive_int, default=1, help="forest training threads")
    s.add_argument("-o", "--output", help="model file (forest: flat binary; others: container)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a saved model on a session CSV")
    s.add_argument("model_file")
    s.add_argument("data")
    s.add_argument("--held-out", action="store_true", help="score only the stratified test split")
    s.add_argument("--test-fraction", type=float, default=0.2)
    s.add_argument("--seed", type=int, default=1738)
    s.add_argument("--json", action="store_true", help="also print metrics as JSON")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("export", help="compile a flat forest file to C source")
    s.add_argument("model_file")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_export)

    s = sub.add_parser("stream", help="replay a session through the smoothed streaming classifier")
    s.add_argument("data")
    s.add_argument("--model", dest="model_file", required=True)
    s.add_argument("--stride-ms", type=_positive_int, default=100)
    s.add_argument("--horizon-ms", type=_positive_int, default=500)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_stream)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "cv", None) is not None and args.cv < 2:
        parser.error("--cv needs at least 2 folds")
    try:
        return args.func(args)
    except (CliError, SessionFormatError, FlatFormatError, ModelFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
