"""Versioned checkpoint files.

A checkpoint carries everything needed to rebuild and rerun the network:
weights, the full architecture config, the epoch it was taken at, and the
validation error measured there. The format version is checked on load so a
stale reader fails loudly instead of misinterpreting fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch

from shotclass.config import SlowFastConfig
from shotclass.model import SlowFast, build_slowfast

__all__ = ["CHECKPOINT_FORMAT_VERSION", "CheckpointError", "LoadedCheckpoint",
           "save_checkpoint", "load_checkpoint"]

CHECKPOINT_FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


@dataclass
class LoadedCheckpoint:
    model: SlowFast
    config: SlowFastConfig
    epoch: int
    val_error: float
    train_config: dict | None
    optimizer_state: dict | None


def save_checkpoint(path, model: SlowFast, *, epoch: int, val_error: float,
                    train_config: dict | None = None,
                    optimizer: torch.optim.Optimizer | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "model_config": model.config.to_mapping(),
        "epoch": int(epoch),
        "val_error": float(val_error),
        "model_state": model.state_dict(),
        "train_config": dict(train_config) if train_config is not None else None,
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path, map_location="cpu") -> LoadedCheckpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location=map_location, weights_only=True)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint format version {version!r} "
            f"(this build reads version {CHECKPOINT_FORMAT_VERSION})"
        )
    config = SlowFastConfig.from_mapping(payload["model_config"])
    model = build_slowfast(config)
    model.load_state_dict(payload["model_state"], strict=True)
    model.eval()
    return LoadedCheckpoint(
        model=model,
        config=config,
        epoch=int(payload["epoch"]),
        val_error=float(payload["val_error"]),
        train_config=payload.get("train_config"),
        optimizer_state=payload.get("optimizer_state"),
    )
