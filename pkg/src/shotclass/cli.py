"""Command-line entry point.

Commands: prepare, train, evaluate, report, triage-serve. Every command
that takes a config writes the fully resolved settings next to its outputs
so the run can be reproduced exactly.

Exit codes: 0 success, 1 usage or configuration problem, 2 data problem,
3 runtime failure (including training divergence).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checkpoint import CheckpointError
from .config import ConfigError
from .data.clips import DecodeError
from .data.manifest import ManifestError, load_manifest
from .data.splits import SplitError
from .experiment import (
    load_experiment_config,
    prepare_dataset,
    render_run_table,
    run_evaluation,
    run_training,
    summarize_run,
)
from .metrics import (
    MetricError,
    accuracy,
    confusion_matrix,
    read_predictions,
)
from .training import TrainingError
from .triage import (
    TriageError,
    TriageStore,
    collect_errors,
    load_store,
    render_category_report,
    save_store,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

_DATA_ERRORS = (ManifestError, SplitError, DecodeError, MetricError,
                TriageError, CheckpointError, FileNotFoundError)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; this toolkit reserves 2
    # for data problems
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="shotclass",
                     description="Train, evaluate and triage two-pathway video classifiers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_config(p):
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config entry")

    p = sub.add_parser("prepare", help="assign train/val/test splits to a manifest")
    add_config(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("train", help="train a model")
    add_config(p)
    p.add_argument("--manifest", help="manifest with splits (default: data.manifest)")
    p.add_argument("--out", required=True, help="run directory")

    p = sub.add_parser("evaluate", help="score a split with a checkpoint")
    add_config(p)
    p.add_argument("--manifest", help="manifest with splits (default: data.manifest)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ensemble", choices=["3x2", "single"], default="3x2",
                   help="3x2 = six summed views per video; single = one random clip")
    p.add_argument("--seed", type=int, default=0, help="clip seed for --ensemble single")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("report", help="render accuracy and error-category tables")
    p.add_argument("--runs", nargs="*", default=[], help="run directories to tabulate")
    p.add_argument("--triage-store", help="triage store directory for the category table")
    p.add_argument("--out", help="write the report here instead of stdout")

    p = sub.add_parser("triage-serve", help="serve the error-review HTTP API")
    p.add_argument("--store", required=True, help="triage store directory")
    p.add_argument("--predictions", help="prediction file to initialize the store from")
    p.add_argument("--manifest", help="manifest supplying clip media paths")
    p.add_argument("--source-split", default="test",
                   help="which split the predictions came from (recorded in reports)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    return parser


def _load_manifest_for(args, cfg):
    path = args.manifest or cfg.manifest_path
    if path is None:
        raise ConfigError("no manifest: set data.manifest or pass --manifest")
    return load_manifest(path)


def _cmd_prepare(args) -> int:
    cfg = load_experiment_config(args.config, args.overrides)
    path = prepare_dataset(cfg, args.out)
    manifest = load_manifest(path)
    counts = {s: len(manifest.records_for_split(s)) for s in ("train", "val", "test")}
    print(f"wrote {path}")
    print(f"splits: train={counts['train']} val={counts['val']} test={counts['test']}")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = load_experiment_config(args.config, args.overrides)
    manifest = _load_manifest_for(args, cfg)

    def progress(rec):
        print(f"epoch {rec.epoch:4d}  train_err {rec.train_error:6.2f}%  "
              f"val_err {rec.val_error:6.2f}%  lr {rec.lr:.5f}  {rec.seconds:.1f}s")

    run = run_training(cfg, manifest, args.out, progress=progress)
    if run.diverged:
        print("training diverged; last good checkpoint retained", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"best epoch {run.best_epoch} (val_err {run.best_val_error:.2f}%)"
          + (" [stopped early]" if run.stopped_early else ""))
    print(f"history: {Path(args.out) / 'history.csv'}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    cfg = load_experiment_config(args.config, args.overrides)
    manifest = _load_manifest_for(args, cfg)
    policy = "ensemble" if args.ensemble == "3x2" else "single"
    records = run_evaluation(cfg, manifest, args.checkpoint, args.out,
                             policy=policy, seed=args.seed)
    print(f"{len(records)} videos, accuracy {accuracy(records):.2f}% "
          f"({'6 views summed' if policy == 'ensemble' else 'single clip'})")
    print(f"predictions: {Path(args.out) / 'predictions.csv'}")
    return EXIT_OK


def _cmd_report(args) -> int:
    if not args.runs and not args.triage_store:
        raise ConfigError("report needs --runs and/or --triage-store")
    chunks = []
    if args.runs:
        chunks.append(render_run_table([summarize_run(d) for d in args.runs]))
    if args.triage_store:
        store = load_store(args.triage_store)
        chunks.append(render_category_report(store.report()))
    text = "\n".join(chunks)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def _init_store(args) -> TriageStore:
    store_dir = Path(args.store)
    if (store_dir / "cases.json").exists():
        return load_store(store_dir)
    if not args.predictions:
        raise ConfigError(
            f"{store_dir} holds no store yet; pass --predictions to initialize it")
    records, class_names = read_predictions(args.predictions)
    cases = collect_errors(records, class_names)
    media = {}
    if args.manifest:
        manifest = load_manifest(args.manifest)
        media = {r.id: r.path for r in manifest.records}
    store = TriageStore(cases, source_split=args.source_split,
                        media_paths=media, class_names=class_names)
    save_store(store_dir, store)
    return store


def _cmd_triage_serve(args) -> int:
    from .triage_api import serve_triage_api

    store = _init_store(args)
    confusion = None
    if args.predictions:
        records, class_names = read_predictions(args.predictions)
        confusion = confusion_matrix(records, class_names)
    print(f"{len(store)} error cases; serving on http://{args.host}:{args.port}")
    serve_triage_api(store, host=args.host, port=args.port,
                     confusion=confusion, persist_dir=args.store)
    return EXIT_OK


_COMMANDS = {
    "prepare": _cmd_prepare,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
    "triage-serve": _cmd_triage_serve,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
