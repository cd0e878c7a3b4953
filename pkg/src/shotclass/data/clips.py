"""Clip decoding and preprocessing.

Every clip handed to the network is float32 (3, clip_len, crop, crop),
normalized per channel. The pipeline is: decode -> pick a temporal window
-> scale shortest side -> crop -> optional flip -> normalize.

Videos are decoded with OpenCV; ``.npy``/``.npz`` files holding a
(T, H, W, 3) uint8 array are treated as already-decoded video, which is
also the on-disk cache format (one ``<record id>.npy`` per video).

Randomness policy, by mode:
  train      random temporal offset, random crop position, horizontal flip
             with the configured probability
  eval + rng random temporal offset only (the one-random-clip validation
             policy); crop centered, no flip
  eval       fully deterministic: centered window, centered crop

When a generator is consumed, draws happen in a fixed order (temporal
offset, crop y, crop x, flip) so histories are reproducible.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np
import torch

from ..config import SlowFastConfig, round_half_up
from .manifest import VideoRecord

__all__ = ["DecodeError", "decode_video", "write_video_array", "cached_decode",
           "temporal_indices", "scale_shortest_side", "spatial_crop",
           "normalize_clip", "preprocess_clip", "enumerate_test_views",
           "DEFAULT_FPS"]

# assumed only when a container reports no frame rate
DEFAULT_FPS = 30.0


class DecodeError(RuntimeError):
    pass


def decode_video(path) -> np.ndarray:
    """Decode a video file to a (T, H, W, 3) uint8 RGB array."""
    path = Path(path)
    if not path.exists():
        raise DecodeError(f"video file not found: {path}")
    if path.suffix == ".npy":
        frames = np.load(path)
        return _check_frames(frames, path)
    if path.suffix == ".npz":
        with np.load(path) as archive:
            if "frames" not in archive:
                raise DecodeError(f"{path}: npz archive has no 'frames' array")
            frames = archive["frames"]
        return _check_frames(frames, path)

    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise DecodeError(f"cannot open video: {path}")
    frames = []
    try:
        while True:
            ok, frame = cap.read()
            if not ok:
                break
            frames.append(cv2.cvtColor(frame, cv2.COLOR_BGR2RGB))
    finally:
        cap.release()
    if not frames:
        raise DecodeError(f"no decodable frames in {path}")
    return np.stack(frames)


def _check_frames(frames: np.ndarray, path: Path) -> np.ndarray:
    if frames.ndim != 4 or frames.shape[-1] != 3:
        raise DecodeError(
            f"{path}: expected (T, H, W, 3) frame array, got shape {tuple(frames.shape)}"
        )
    if frames.dtype != np.uint8:
        raise DecodeError(f"{path}: expected uint8 frames, got {frames.dtype}")
    if frames.shape[0] == 0:
        raise DecodeError(f"{path}: zero-frame video")
    return frames


def write_video_array(path, frames: np.ndarray) -> Path:
    """Store a (T, H, W, 3) uint8 array as a .npy decoded-video file."""
    path = Path(path)
    if path.suffix != ".npy":
        # np.save would quietly write to <name>.npy otherwise
        raise ValueError(f"write_video_array writes .npy files, got {path.name!r}")
    frames = np.asarray(frames, dtype=np.uint8)
    _check_frames(frames, path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, frames)
    return path


def cached_decode(record: VideoRecord, cache_dir=None) -> np.ndarray:
    """Decode a record's video, going through the decoded-frame cache when a
    cache directory is given. Cache layout: ``<cache_dir>/<record id>.npy``."""
    try:
        if cache_dir is None:
            return decode_video(record.path)
        cache_path = Path(cache_dir) / f"{record.id}.npy"
        if cache_path.exists():
            return decode_video(cache_path)
        frames = decode_video(record.path)
        write_video_array(cache_path, frames)
        return frames
    except DecodeError as exc:
        raise DecodeError(f"record {record.id!r}: {exc}") from exc


def temporal_indices(
    frame_count: int, clip_len: int, start: int | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Frame indices of one temporal window of length clip_len.

    start=None picks the centered window (or a random one when rng is
    given). Sources shorter than clip_len wrap around so the window always
    has exactly clip_len entries.
    """
    if frame_count <= 0:
        raise ValueError(f"frame_count must be > 0, got {frame_count}")
    if clip_len <= 0:
        raise ValueError(f"clip_len must be > 0, got {clip_len}")
    max_start = max(frame_count - clip_len, 0)
    if start is None:
        if rng is not None:
            # wrap-case offset ranges over the whole loop period
            hi = max_start if frame_count >= clip_len else frame_count - 1
            start = int(rng.integers(0, hi + 1))
        else:
            start = max_start // 2
    if start < 0:
        raise ValueError(f"start must be >= 0, got {start}")
    if frame_count >= clip_len and start > max_start:
        raise ValueError(f"start {start} overruns video of {frame_count} frames")
    return (start + np.arange(clip_len)) % frame_count


def scale_shortest_side(frames: np.ndarray, target: int) -> np.ndarray:
    """Resize every frame so the shorter image side equals target, keeping
    aspect ratio (the longer side rounds half up)."""
    t, h, w = frames.shape[:3]
    if h <= w:
        new_h, new_w = target, round_half_up(w * target / h)
    else:
        new_h, new_w = round_half_up(h * target / w), target
    if (new_h, new_w) == (h, w):
        return frames
    out = np.empty((t, new_h, new_w, 3), dtype=frames.dtype)
    for i in range(t):
        out[i] = cv2.resize(frames[i], (new_w, new_h), interpolation=cv2.INTER_LINEAR)
    return out


def spatial_crop(frames: np.ndarray, size: int, y: int, x: int) -> np.ndarray:
    t, h, w = frames.shape[:3]
    if size > h or size > w:
        raise ValueError(f"crop {size} exceeds frame size {h}x{w}")
    if y < 0 or x < 0 or y + size > h or x + size > w:
        raise ValueError(f"crop window ({y},{x})+{size} outside {h}x{w} frame")
    return frames[:, y:y + size, x:x + size, :]


def normalize_clip(frames: np.ndarray, mean, std) -> torch.Tensor:
    """uint8 (T, H, W, 3) -> normalized float32 tensor (3, T, H, W)."""
    clip = frames.astype(np.float32) / 255.0
    clip -= np.asarray(mean, dtype=np.float32)
    clip /= np.asarray(std, dtype=np.float32)
    return torch.from_numpy(np.ascontiguousarray(clip.transpose(3, 0, 1, 2)))


def preprocess_clip(
    record: VideoRecord,
    mode: str,
    rng: np.random.Generator | None = None,
    config: SlowFastConfig | None = None,
    cache_dir=None,
    frames: np.ndarray | None = None,
) -> torch.Tensor:
    """Produce one network-ready clip tensor for a record.

    mode "train" applies the augmentation suite (random window, random crop,
    flip with probability config.flip_prob; rng required). mode "eval"
    centers everything and is a pure function of the record, unless an rng
    is passed, in which case only the temporal window is randomized (the
    validation clip policy).

    ``frames`` short-circuits decoding when the caller already holds the
    array.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "train" and rng is None:
        raise ValueError("train mode needs an rng")
    cfg = config if config is not None else _DEFAULT_GEOMETRY
    if frames is None:
        frames = cached_decode(record, cache_dir)

    idx = temporal_indices(frames.shape[0], cfg.clip_len, rng=rng)
    window = frames[idx]
    window = scale_shortest_side(window, cfg.scale_short_side)
    _, h, w = window.shape[:3]
    if mode == "train":
        y = int(rng.integers(0, h - cfg.crop_size + 1))
        x = int(rng.integers(0, w - cfg.crop_size + 1))
    else:
        y = (h - cfg.crop_size) // 2
        x = (w - cfg.crop_size) // 2
    window = spatial_crop(window, cfg.crop_size, y, x)
    if mode == "train" and rng.random() < cfg.flip_prob:
        window = window[:, :, ::-1, :]
    return normalize_clip(window, cfg.mean, cfg.std)


def enumerate_test_views(
    record: VideoRecord,
    config: SlowFastConfig | None = None,
    cache_dir=None,
    frames: np.ndarray | None = None,
) -> list[torch.Tensor]:
    """The six deterministic test views of a video: two temporal windows
    (centered at 1/3 and 2/3 of its length, starts clamped into range) times
    three crops placed along the longer side (left/center/right, or
    top/center/bottom for portrait frames). Windows coincide when the video
    is no longer than one clip.
    """
    cfg = config if config is not None else _DEFAULT_GEOMETRY
    if frames is None:
        frames = cached_decode(record, cache_dir)
    total = frames.shape[0]

    starts = []
    max_start = max(total - cfg.clip_len, 0)
    for frac in (1 / 3, 2 / 3):
        center = total * frac
        start = round_half_up(center - cfg.clip_len / 2)
        starts.append(min(max(start, 0), max_start))

    views = []
    for start in starts:
        idx = temporal_indices(total, cfg.clip_len, start=start)
        window = scale_shortest_side(frames[idx], cfg.scale_short_side)
        _, h, w = window.shape[:3]
        if w >= h:
            y = (h - cfg.crop_size) // 2
            positions = [(y, 0), (y, (w - cfg.crop_size) // 2), (y, w - cfg.crop_size)]
        else:
            x = (w - cfg.crop_size) // 2
            positions = [(0, x), ((h - cfg.crop_size) // 2, x), (h - cfg.crop_size, x)]
        for y, x in positions:
            views.append(normalize_clip(
                spatial_crop(window, cfg.crop_size, y, x), cfg.mean, cfg.std))
    return views


# geometry defaults shared by both entry points; num_classes is irrelevant here
_DEFAULT_GEOMETRY = SlowFastConfig(num_classes=12)
