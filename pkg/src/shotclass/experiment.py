"""Experiment configuration and orchestration.

One experiment = one key/value config file with dotted keys:

  model.*   network settings; either ``model.preset`` (2x32, 4x16, 8x8)
            plus overrides, or a full explicit set
  train.*   optimization settings (epochs_max, batch_size, ...)
  data.*    manifest path, decoded-frame cache, split ratios/seed/strategy
  eval.*    evaluation split and score summation domain

Unknown keys are errors, never warnings. Every command writes the fully
resolved configuration next to its outputs so any artifact can be
regenerated from the snapshot plus its inputs.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint
from .config import (
    ConfigError,
    SlowFastConfig,
    parse_preset_overrides,
    preset_config,
    read_kv_file,
    write_kv_file,
)
from .data.manifest import DatasetManifest, load_manifest, save_manifest
from .data.splits import assign_splits
from .metrics import (
    PredictionRecord,
    accuracy,
    confusion_matrix,
    ensemble_predict,
    predict_single_clip,
    render_confusion,
    write_predictions,
)
from .training import TrainConfig, TrainingRun, train

__all__ = ["ExperimentConfig", "parse_experiment_config", "load_experiment_config",
           "snapshot_mapping", "write_snapshot", "prepare_dataset", "run_training",
           "run_evaluation", "render_run_table", "summarize_run"]

_DATA_KEYS = ("manifest", "cache_dir", "split_ratios", "split_seed", "split_strategy")
_EVAL_KEYS = ("split", "sum_domain")
_RUN_KEYS = ("label",)
_TRAIN_FIELDS = {
    "epochs_max": int, "batch_size": int, "optimizer": str,
    "learning_rate": float, "lr_schedule": str, "weight_decay": float,
    "dropout_rate": float, "early_stop_patience": int,
    "checkpoint_every": int, "seed": int,
}
_OPTIONAL_TRAIN_FIELDS = ("dropout_rate", "early_stop_patience")


@dataclass(frozen=True)
class ExperimentConfig:
    model: SlowFastConfig
    train: TrainConfig
    manifest_path: str | None = None
    cache_dir: str | None = None
    split_ratios: tuple[float, float, float] = (0.7, 0.2, 0.1)
    split_seed: int = 0
    split_strategy: str = "stratified"
    eval_split: str = "test"
    sum_domain: str = "probability"
    label: str = "custom"


def _split_prefixed(mapping: dict) -> dict[str, dict[str, str]]:
    groups: dict[str, dict[str, str]] = {
        "model": {}, "train": {}, "data": {}, "eval": {}, "run": {},
    }
    for key, value in mapping.items():
        prefix, dot, rest = key.partition(".")
        if not dot or prefix not in groups or not rest:
            raise ConfigError(f"unknown config key {key!r}")
        groups[prefix][rest] = value
    return groups


def _parse_model(section: dict[str, str]) -> tuple[SlowFastConfig, str]:
    if "preset" in section:
        section = dict(section)
        name = section.pop("preset")
        if "num_classes" not in section:
            raise ConfigError("model.num_classes is required")
        try:
            num_classes = int(section.pop("num_classes"))
        except ValueError:
            raise ConfigError("model.num_classes must be an integer") from None
        return preset_config(name, num_classes, **parse_preset_overrides(section)), name
    return SlowFastConfig.from_mapping(section), "custom"


def _parse_train(section: dict[str, str]) -> TrainConfig:
    kwargs = {}
    for key, raw in section.items():
        if key not in _TRAIN_FIELDS:
            raise ConfigError(f"unknown config key train.{key}")
        if key in _OPTIONAL_TRAIN_FIELDS and raw.lower() in ("none", ""):
            kwargs[key] = None
            continue
        try:
            kwargs[key] = _TRAIN_FIELDS[key](raw)
        except ValueError:
            raise ConfigError(f"train.{key}: cannot parse {raw!r}") from None
    return TrainConfig(**kwargs)


def parse_experiment_config(mapping: dict, base_dir=None) -> ExperimentConfig:
    """Build an ExperimentConfig from a flat dotted-key mapping. Relative
    data paths resolve against base_dir (the config file's directory)."""
    groups = _split_prefixed(mapping)
    model, preset_name = _parse_model(groups["model"])
    train_cfg = _parse_train(groups["train"])

    data = groups["data"]
    for key in data:
        if key not in _DATA_KEYS:
            raise ConfigError(f"unknown config key data.{key}")
    evals = groups["eval"]
    for key in evals:
        if key not in _EVAL_KEYS:
            raise ConfigError(f"unknown config key eval.{key}")
    run = groups["run"]
    for key in run:
        if key not in _RUN_KEYS:
            raise ConfigError(f"unknown config key run.{key}")

    def resolve(p: str | None) -> str | None:
        if p is None:
            return None
        path = Path(p)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        if path.is_absolute():
            return os.path.normpath(path)
        return str(path)

    ratios = (0.7, 0.2, 0.1)
    if "split_ratios" in data:
        parts = [s for s in data["split_ratios"].split(",") if s.strip()]
        if len(parts) != 3:
            raise ConfigError(f"data.split_ratios needs 3 numbers, got {data['split_ratios']!r}")
        ratios = tuple(float(s) for s in parts)

    strategy = data.get("split_strategy", "stratified")
    if strategy not in ("stratified", "grouped"):
        raise ConfigError(f"data.split_strategy must be stratified or grouped, got {strategy!r}")
    sum_domain = evals.get("sum_domain", "probability")
    if sum_domain not in ("probability", "logit"):
        raise ConfigError(f"eval.sum_domain must be probability or logit, got {sum_domain!r}")

    return ExperimentConfig(
        model=model,
        train=train_cfg,
        manifest_path=resolve(data.get("manifest")),
        cache_dir=resolve(data.get("cache_dir")),
        split_ratios=ratios,
        split_seed=int(data.get("split_seed", "0")),
        split_strategy=strategy,
        eval_split=evals.get("split", "test"),
        sum_domain=sum_domain,
        label=run.get("label", preset_name),
    )


def load_experiment_config(path, overrides=()) -> ExperimentConfig:
    """Read a config file and apply ``key=value`` override strings on top."""
    path = Path(path)
    mapping = read_kv_file(path)
    for item in overrides:
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"override {item!r} is not key=value")
        mapping[key.strip()] = value.strip()
    return parse_experiment_config(mapping, base_dir=path.parent)


def snapshot_mapping(cfg: ExperimentConfig) -> dict[str, str]:
    """Every effective setting, flattened, for the resolved-config snapshot."""
    out: dict[str, str] = {}
    for key, value in cfg.model.to_mapping().items():
        out[f"model.{key}"] = value
    for key, value in asdict(cfg.train).items():
        out[f"train.{key}"] = "none" if value is None else str(value)
    if cfg.manifest_path is not None:
        out["data.manifest"] = cfg.manifest_path
    if cfg.cache_dir is not None:
        out["data.cache_dir"] = cfg.cache_dir
    out["data.split_ratios"] = ",".join(repr(r) for r in cfg.split_ratios)
    out["data.split_seed"] = str(cfg.split_seed)
    out["data.split_strategy"] = cfg.split_strategy
    out["eval.split"] = cfg.eval_split
    out["eval.sum_domain"] = cfg.sum_domain
    out["run.label"] = cfg.label
    return out


def write_snapshot(cfg: ExperimentConfig, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return write_kv_file(out_dir / "resolved_config.cfg", snapshot_mapping(cfg))


def prepare_dataset(cfg: ExperimentConfig, out_dir) -> Path:
    """Assign splits to the configured manifest and write the result (plus
    the resolved config) under out_dir."""
    if cfg.manifest_path is None:
        raise ConfigError("data.manifest is required for prepare")
    manifest = load_manifest(cfg.manifest_path)
    out = assign_splits(manifest, ratios=cfg.split_ratios, seed=cfg.split_seed,
                        strategy=cfg.split_strategy)
    out_dir = Path(out_dir)
    write_snapshot(cfg, out_dir)
    return save_manifest(out_dir / "manifest_with_splits.csv", out)


def run_training(cfg: ExperimentConfig, manifest: DatasetManifest, out_dir,
                 progress=None) -> TrainingRun:
    out_dir = Path(out_dir)
    write_snapshot(cfg, out_dir)
    return train(cfg.model, manifest, cfg.train, out_dir=out_dir,
                 cache_dir=cfg.cache_dir, progress=progress)


def run_evaluation(
    cfg: ExperimentConfig,
    manifest: DatasetManifest,
    checkpoint_path,
    out_dir,
    policy: str = "ensemble",
    seed: int = 0,
) -> list[PredictionRecord]:
    """Score the configured eval split with a checkpointed model and write
    predictions.csv plus confusion.tsv under out_dir."""
    if policy not in ("ensemble", "single"):
        raise ConfigError(f"policy must be ensemble or single, got {policy!r}")
    loaded = load_checkpoint(checkpoint_path)
    records = manifest.records_for_split(cfg.eval_split)
    if not records:
        raise ConfigError(f"split {cfg.eval_split!r} is empty")
    rng = np.random.default_rng(seed)
    out = []
    for rec in records:
        if policy == "ensemble":
            out.append(ensemble_predict(loaded.model, rec, manifest.classes,
                                        config=loaded.config, cache_dir=cfg.cache_dir,
                                        sum_domain=cfg.sum_domain))
        else:
            out.append(predict_single_clip(loaded.model, rec, manifest.classes, rng,
                                           config=loaded.config, cache_dir=cfg.cache_dir))
    out_dir = Path(out_dir)
    write_snapshot(cfg, out_dir)
    write_predictions(out_dir / "predictions.csv", out, manifest.classes)
    cm = confusion_matrix(out, manifest.classes)
    (out_dir / "confusion.tsv").write_text(render_confusion(cm), encoding="utf-8")
    return out


def summarize_run(run_dir) -> dict:
    """Pull the headline numbers out of one run directory (history and/or
    predictions, whichever are present)."""
    from .training import read_history

    run_dir = Path(run_dir)
    info: dict = {"name": run_dir.name}
    snap = run_dir / "resolved_config.cfg"
    if snap.exists():
        mapping = read_kv_file(snap)
        info["name"] = mapping.get("run.label", run_dir.name)
    history_file = run_dir / "history.csv"
    if history_file.exists():
        history = read_history(history_file)
        best = min(history, key=lambda r: (r.val_error, r.epoch))
        info["train_acc"] = 100.0 - best.train_error
        info["val_acc"] = 100.0 - best.val_error
        info["best_epoch"] = best.epoch
    pred_file = run_dir / "predictions.csv"
    if pred_file.exists():
        from .metrics import read_predictions

        records, _ = read_predictions(pred_file)
        info["test_acc"] = accuracy(records)
        info["test_views"] = records[0].views_used if records else 0
        info["test_n"] = len(records)
    return info


def render_run_table(summaries: list[dict]) -> str:
    """Accuracy table, one row per run: architecture, train/val accuracy at
    the best epoch, summed-view test accuracy."""
    header = f"{'architecture':<16}{'train_acc':>10}{'val_acc':>10}{'test_acc':>10}{'test_n':>8}"
    lines = [header, "-" * len(header)]
    for s in summaries:
        def fmt(key):
            return f"{s[key]:.2f}" if key in s else "n/a"
        lines.append(f"{s.get('name', '?'):<16}{fmt('train_acc'):>10}"
                     f"{fmt('val_acc'):>10}{fmt('test_acc'):>10}"
                     f"{s.get('test_n', 'n/a'):>8}")
    return "\n".join(lines) + "\n"
