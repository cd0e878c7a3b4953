"""Synthetic corpora for tests, demos, and smoke runs.

Three generators:

* moving-blob corpus: two classes separated only by horizontal motion
  direction; appearance statistics are identical, so any model that
  separates them must be using temporal structure.
* noise corpus: balanced multi-class videos of pure pixel noise; labels
  carry no signal, so any evaluator should sit at the chance floor.
* THETIS-shaped manifest: 12 classes x 55 players x 3 repetitions with
  plausible durations and no backing files, for split/statistics math.

All generators are deterministic functions of their seed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .manifest import THETIS_CLASSES, DatasetManifest, VideoRecord, save_manifest
from .clips import DEFAULT_FPS, write_video_array

__all__ = ["moving_blob_frames", "make_motion_corpus", "make_noise_corpus",
           "make_thetis_like_manifest", "MOTION_CLASSES"]

MOTION_CLASSES = ("leftward", "rightward")


def moving_blob_frames(
    frame_count: int, height: int, width: int, direction: int,
    rng: np.random.Generator, blob_size: int = 10, speed: float = 1.5,
) -> np.ndarray:
    """A bright square drifting horizontally over dim noise; direction is
    -1 (leftward) or +1 (rightward). Position wraps at the frame edge."""
    if direction not in (-1, 1):
        raise ValueError(f"direction must be -1 or 1, got {direction}")
    frames = rng.integers(0, 40, size=(frame_count, height, width, 3), dtype=np.uint8)
    x0 = float(rng.integers(0, width))
    y = int(rng.integers(0, max(height - blob_size, 1)))
    level = int(rng.integers(190, 256))
    for t in range(frame_count):
        x = int(round(x0 + direction * speed * t)) % width
        for dx in range(blob_size):
            frames[t, y:y + blob_size, (x + dx) % width, :] = level
    return frames


def _write_corpus(
    root: Path, classes, make_frames, per_split, frame_count, fps, seed, source_note,
    mark_splits: bool = True,
) -> Path:
    records = []
    rng = np.random.default_rng(seed)
    for ci, cls in enumerate(classes):
        serial = 0
        for split, count in per_split.items():
            for _ in range(count):
                vid = f"{cls}_{serial:03d}"
                rel = Path("videos") / f"{vid}.npy"
                write_video_array(root / rel, make_frames(ci, rng))
                records.append(VideoRecord(
                    id=vid, path=str(rel), class_label=cls, player_id=f"p{serial:02d}",
                    frame_count=frame_count, duration=frame_count / fps,
                    split=split if mark_splits else "unassigned",
                ))
                serial += 1
    manifest = DatasetManifest(tuple(classes), records, source_note)
    return save_manifest(root / "manifest.csv", manifest)


def make_motion_corpus(
    root, train_per_class: int = 4, val_per_class: int = 1, test_per_class: int = 1,
    frame_count: int = 72, height: int = 48, width: int = 64, seed: int = 0,
    mark_splits: bool = True,
) -> Path:
    """Write the two-class motion corpus under root and return the manifest
    path. Splits are assigned directly in the manifest unless mark_splits is
    False (leave them unassigned for a later split step)."""
    per_split = {"train": train_per_class, "val": val_per_class, "test": test_per_class}

    def make_frames(class_index: int, rng: np.random.Generator) -> np.ndarray:
        direction = -1 if class_index == 0 else 1
        return moving_blob_frames(frame_count, height, width, direction, rng)

    return _write_corpus(Path(root), MOTION_CLASSES, make_frames, per_split,
                         frame_count, DEFAULT_FPS, seed, "synthetic motion corpus",
                         mark_splits=mark_splits)


def make_noise_corpus(
    root, classes=THETIS_CLASSES, per_class: int = 12, frame_count: int = 24,
    height: int = 48, width: int = 64, seed: int = 0, split: str = "val",
) -> Path:
    """Write a balanced noise corpus (every video pure uniform noise, all in
    one split) and return the manifest path."""
    per_split = {split: per_class}

    def make_frames(class_index: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, 256, size=(frame_count, height, width, 3), dtype=np.uint8)

    return _write_corpus(Path(root), classes, make_frames, per_split,
                         frame_count, DEFAULT_FPS, seed, "synthetic noise corpus")


def make_thetis_like_manifest(
    seed: int = 0, players: int = 55, reps: int = 3, fps: float = DEFAULT_FPS,
) -> DatasetManifest:
    """An in-memory manifest with the shape of the 1980-video tennis corpus:
    12 classes, players x reps records per class, 2-5 s durations. Paths are
    placeholders; use it for split and statistics logic only."""
    rng = np.random.default_rng(seed)
    records = []
    for cls in THETIS_CLASSES:
        for p in range(1, players + 1):
            for r in range(1, reps + 1):
                duration = float(rng.uniform(2.0, 5.0))
                records.append(VideoRecord(
                    id=f"{cls}_p{p:02d}_r{r}",
                    path=f"videos/{cls}_p{p:02d}_r{r}.avi",
                    class_label=cls,
                    player_id=f"p{p:02d}",
                    frame_count=max(int(round(duration * fps)), 1),
                    duration=duration,
                ))
    return DatasetManifest(THETIS_CLASSES, records, "synthetic shape-only manifest")
