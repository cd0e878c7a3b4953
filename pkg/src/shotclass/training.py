"""Supervised training with early stopping at minimum validation error.

Each epoch runs one pass over the train split (augmented clips, shuffled
order) and one validation pass where every val video is scored from a
single randomly placed clip. The best-so-far checkpoint (lowest validation
error, earliest epoch on ties) is kept alongside periodic ones. A
non-finite loss aborts the run; the last good checkpoint stays on disk and
the run is flagged diverged.

With a fixed seed and the default single-worker data order, two runs
produce identical histories.
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .checkpoint import save_checkpoint
from .config import ConfigError, SlowFastConfig
from .data.clips import DecodeError, preprocess_clip
from .data.manifest import DatasetManifest
from .metrics import predict_single_clip
from .model import build_slowfast

__all__ = ["TrainingError", "TrainConfig", "EpochRecord", "TrainingRun",
           "train", "validate", "early_stop_check",
           "write_history", "read_history"]

OPTIMIZERS = ("sgd-momentum", "adaptive")
SCHEDULES = ("cosine", "constant")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs_max: int = 200
    batch_size: int = 8
    optimizer: str = "sgd-momentum"
    learning_rate: float = 0.01
    lr_schedule: str = "cosine"
    weight_decay: float = 1e-4
    dropout_rate: float | None = None  # None inherits the model config's rate
    early_stop_patience: int | None = None  # None = epochs_max (never stops early)
    checkpoint_every: int = 25
    seed: int = 0

    def __post_init__(self):
        if self.epochs_max < 1:
            raise ConfigError(f"epochs_max must be >= 1, got {self.epochs_max}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.lr_schedule not in SCHEDULES:
            raise ConfigError(f"lr_schedule must be one of {SCHEDULES}, got {self.lr_schedule!r}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.dropout_rate is not None and not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.checkpoint_every < 1:
            raise ConfigError(f"checkpoint_every must be >= 1, got {self.checkpoint_every}")
        if self.early_stop_patience is not None and not (
            1 <= self.early_stop_patience <= self.epochs_max
        ):
            raise ConfigError(
                f"early_stop_patience must be in [1, epochs_max={self.epochs_max}], "
                f"got {self.early_stop_patience}"
            )

    @property
    def patience(self) -> int:
        return self.early_stop_patience if self.early_stop_patience is not None \
            else self.epochs_max


@dataclass(frozen=True)
class EpochRecord:
    epoch: int  # 1-based
    train_error: float  # percent
    val_error: float  # percent
    lr: float
    seconds: float


@dataclass
class TrainingRun:
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    checkpoints: list[str] = field(default_factory=list)
    stopped_early: bool = False
    diverged: bool = False

    @property
    def best_val_error(self) -> float:
        if not self.history:
            raise TrainingError("empty run has no best epoch")
        return self.history[self.best_epoch - 1].val_error


def early_stop_check(history: list[EpochRecord], patience: int) -> str:
    """"stop" once the best validation error is `patience` or more epochs
    old, else "continue". Pure function of its inputs."""
    if not history:
        raise TrainingError("early_stop_check needs a nonempty history")
    if patience < 1:
        raise TrainingError(f"patience must be >= 1, got {patience}")
    best_idx = min(range(len(history)), key=lambda i: (history[i].val_error, i))
    return "stop" if (len(history) - 1 - best_idx) >= patience else "continue"


def validate(
    model: nn.Module,
    manifest: DatasetManifest,
    seed,
    split: str = "val",
    config: SlowFastConfig | None = None,
    cache_dir=None,
) -> float:
    """Accuracy (percent) over a split, one random clip per video.

    Reproducible for a given seed; records come in manifest order. A video
    that fails to decode is skipped with a warning and leaves the
    denominator.
    """
    records = manifest.records_for_split(split)
    if not records:
        raise TrainingError(f"{split} split is empty")
    rng = np.random.default_rng(seed)
    correct = scored = 0
    for rec in records:
        try:
            pred = predict_single_clip(model, rec, manifest.classes, rng,
                                       config=config, cache_dir=cache_dir)
        except DecodeError as exc:
            warnings.warn(f"skipping {rec.id!r} during validation: {exc}", stacklevel=2)
            continue
        scored += 1
        correct += pred.correct
    if scored == 0:
        raise TrainingError(f"no decodable videos in the {split} split")
    return 100.0 * correct / scored


def _make_optimizer(tc: TrainConfig, model: nn.Module) -> torch.optim.Optimizer:
    if tc.optimizer == "sgd-momentum":
        return torch.optim.SGD(model.parameters(), lr=tc.learning_rate,
                               momentum=0.9, weight_decay=tc.weight_decay)
    return torch.optim.AdamW(model.parameters(), lr=tc.learning_rate,
                             weight_decay=tc.weight_decay)


def train(
    model_config: SlowFastConfig,
    manifest: DatasetManifest,
    tc: TrainConfig,
    out_dir=None,
    cache_dir=None,
    progress=None,
) -> TrainingRun:
    """Run the full training loop and return its history.

    When out_dir is given, checkpoints land in ``out_dir/checkpoints`` and
    the per-epoch history in ``out_dir/history.csv``. Epoch e validates
    with seed [tc.seed, e, 1], so any epoch's recorded validation error can
    be replayed later against its checkpoint.
    """
    train_records = manifest.records_for_split("train")
    if not train_records:
        raise TrainingError("train split is empty")
    if not manifest.records_for_split("val"):
        raise TrainingError("val split is empty")
    if model_config.num_classes != len(manifest.classes):
        raise TrainingError(
            f"model expects {model_config.num_classes} classes but the manifest "
            f"declares {len(manifest.classes)}"
        )

    if tc.dropout_rate is not None:
        model_config = replace(model_config, dropout_rate=tc.dropout_rate)

    torch.manual_seed(tc.seed)
    model = build_slowfast(model_config)
    optimizer = _make_optimizer(tc, model)
    scheduler = None
    if tc.lr_schedule == "cosine":
        scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=tc.epochs_max)
    loss_fn = nn.CrossEntropyLoss()
    label_of = {c: i for i, c in enumerate(manifest.classes)}

    ckpt_dir = None
    if out_dir is not None:
        ckpt_dir = Path(out_dir) / "checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    run = TrainingRun()
    best_val = math.inf
    for epoch in range(1, tc.epochs_max + 1):
        t0 = time.perf_counter()
        lr_now = optimizer.param_groups[0]["lr"]
        rng = np.random.default_rng([tc.seed, epoch])
        order = rng.permutation(len(train_records))

        model.train()
        correct = total = 0
        finite = True
        for lo in range(0, len(order), tc.batch_size):
            chunk = [train_records[i] for i in order[lo:lo + tc.batch_size]]
            clips = torch.stack([
                preprocess_clip(r, "train", rng=rng, config=model_config,
                                cache_dir=cache_dir)
                for r in chunk
            ])
            labels = torch.tensor([label_of[r.class_label] for r in chunk])
            optimizer.zero_grad()
            logits = model(clips)
            loss = loss_fn(logits, labels)
            if not torch.isfinite(loss):
                finite = False
                break
            loss.backward()
            optimizer.step()
            correct += int((logits.argmax(dim=1) == labels).sum())
            total += len(chunk)
        if not finite:
            run.diverged = True
            warnings.warn(
                f"loss became non-finite at epoch {epoch}; aborting, "
                f"last good checkpoint retained", stacklevel=2,
            )
            break

        train_error = 100.0 * (1 - correct / total)
        val_acc = validate(model, manifest, [tc.seed, epoch, 1],
                           config=model_config, cache_dir=cache_dir)
        val_error = 100.0 - val_acc
        if scheduler is not None:
            scheduler.step()
        run.history.append(EpochRecord(
            epoch=epoch, train_error=train_error, val_error=val_error,
            lr=lr_now, seconds=time.perf_counter() - t0,
        ))
        if progress is not None:
            progress(run.history[-1])

        if val_error < best_val:
            best_val = val_error
            run.best_epoch = epoch
            if ckpt_dir is not None:
                path = save_checkpoint(ckpt_dir / "best.pt", model, epoch=epoch,
                                       val_error=val_error, train_config=asdict(tc),
                                       optimizer=optimizer)
                if str(path) not in run.checkpoints:
                    run.checkpoints.append(str(path))
        if ckpt_dir is not None and epoch % tc.checkpoint_every == 0:
            path = save_checkpoint(ckpt_dir / f"epoch_{epoch:04d}.pt", model,
                                   epoch=epoch, val_error=val_error,
                                   train_config=asdict(tc), optimizer=optimizer)
            run.checkpoints.append(str(path))

        if early_stop_check(run.history, tc.patience) == "stop":
            run.stopped_early = True
            break

    if out_dir is not None and run.history:
        write_history(Path(out_dir) / "history.csv", run.history)
    return run


def write_history(path, history: list[EpochRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_err", "val_err", "lr", "seconds"])
        for rec in history:
            writer.writerow([rec.epoch, repr(rec.train_error), repr(rec.val_error),
                             repr(rec.lr), repr(rec.seconds)])
    return path


def read_history(path) -> list[EpochRecord]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["epoch", "train_err", "val_err", "lr", "seconds"]:
        raise TrainingError(f"{path}: not a history file")
    return [EpochRecord(int(r[0]), float(r[1]), float(r[2]), float(r[3]), float(r[4]))
            for r in rows[1:]]
