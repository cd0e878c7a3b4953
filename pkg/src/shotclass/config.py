"""Configuration for the two-pathway video classifier.

A ``SlowFastConfig`` fully determines the network: clip geometry, per-pathway
frame-sampling strides and channel widths, the residual stage plan, and how
fast-stream features are fused into the slow stream. Configs serialize to a
flat ``key = value`` text file (one key per line, ``#`` comments) so that
experiment setups stay diffable and any run can be rebuilt from its snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "ConfigError",
    "PathwayConfig",
    "SlowFastConfig",
    "PRESET_NAMES",
    "preset_config",
    "parse_preset_overrides",
    "round_half_up",
    "read_kv_file",
    "write_kv_file",
]

FUSION_KINDS = ("concatenate", "sum")
PRESET_NAMES = ("2x32", "4x16", "8x8")


class ConfigError(ValueError):
    """Raised for structurally invalid or unknown configuration."""


def round_half_up(x: float) -> int:
    """Round to the nearest integer, ties away from zero (for positive x)."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class PathwayConfig:
    """Frame sampling and channel plan for one pathway.

    temporal_stride: frames between samples taken from the input clip.
    base_channels: channel width of the first residual stage; later stages
        double it.
    temporal_kernel_plan: per-stage flag, True where the stage's blocks use a
        temporal kernel extent of 3 instead of 1.
    stem_temporal_kernel: temporal extent of the stem convolution (odd).
    """

    temporal_stride: int
    base_channels: int
    temporal_kernel_plan: tuple[bool, ...] = (False, False, True, True)
    stem_temporal_kernel: int = 1

    def validate(self, clip_len: int, stage_count: int, name: str = "pathway") -> None:
        if self.temporal_stride < 1:
            raise ConfigError(f"{name}: temporal_stride must be >= 1, got {self.temporal_stride}")
        if clip_len % self.temporal_stride != 0:
            raise ConfigError(
                f"{name}: temporal_stride {self.temporal_stride} does not divide "
                f"clip_len {clip_len}"
            )
        if self.base_channels < 1:
            raise ConfigError(f"{name}: base_channels must be >= 1, got {self.base_channels}")
        if len(self.temporal_kernel_plan) != stage_count:
            raise ConfigError(
                f"{name}: temporal_kernel_plan has {len(self.temporal_kernel_plan)} entries "
                f"for {stage_count} stages"
            )
        if self.stem_temporal_kernel < 1 or self.stem_temporal_kernel % 2 == 0:
            raise ConfigError(
                f"{name}: stem_temporal_kernel must be a positive odd integer, "
                f"got {self.stem_temporal_kernel}"
            )


@dataclass(frozen=True)
class SlowFastConfig:
    """Complete architecture description.

    Invariants (checked at construction):
      * fast.temporal_stride * alpha == slow.temporal_stride
      * fast.base_channels == round(beta * slow.base_channels)
      * clip_len divisible by the slow stride (fast follows)
      * every stage's fast width rounds to >= 1 channel
    """

    num_classes: int
    clip_len: int = 64
    crop_size: int = 224
    scale_short_side: int = 256
    alpha: int = 8
    beta: float = 0.125
    slow: PathwayConfig = PathwayConfig(16, 64, (False, False, True, True), 1)
    fast: PathwayConfig = PathwayConfig(2, 8, (True, True, True, True), 5)
    backbone_depth: tuple[int, ...] = (3, 4, 6, 3)
    fusion_kind: str = "concatenate"
    fusion_temporal_kernel: int = 5
    dropout_rate: float = 0.5
    flip_prob: float = 0.5  # train-time horizontal flip; 0 for tasks where
    # mirroring changes the label (e.g. motion direction)
    mean: tuple[float, float, float] = (0.45, 0.45, 0.45)
    std: tuple[float, float, float] = (0.225, 0.225, 0.225)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.num_classes < 1:
            raise ConfigError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.clip_len < 1:
            raise ConfigError(f"clip_len must be >= 1, got {self.clip_len}")
        if self.crop_size < 1:
            raise ConfigError(f"crop_size must be >= 1, got {self.crop_size}")
        if self.scale_short_side < self.crop_size:
            raise ConfigError(
                f"scale_short_side ({self.scale_short_side}) must be >= crop_size "
                f"({self.crop_size}), otherwise the crop does not fit"
            )
        if self.alpha < 1:
            raise ConfigError(f"alpha must be >= 1, got {self.alpha}")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"beta must lie in (0, 1], got {self.beta}")
        stage_count = len(self.backbone_depth)
        if stage_count < 1 or any(d < 1 for d in self.backbone_depth):
            raise ConfigError(f"backbone_depth must be positive block counts, got {self.backbone_depth}")
        self.slow.validate(self.clip_len, stage_count, "slow pathway")
        self.fast.validate(self.clip_len, stage_count, "fast pathway")
        if self.fast.temporal_stride * self.alpha != self.slow.temporal_stride:
            raise ConfigError(
                f"fast stride ({self.fast.temporal_stride}) x alpha ({self.alpha}) must equal "
                f"slow stride ({self.slow.temporal_stride})"
            )
        expected_fast = round_half_up(self.beta * self.slow.base_channels)
        if self.fast.base_channels != expected_fast:
            raise ConfigError(
                f"fast base_channels must be round(beta x slow base_channels) = "
                f"{expected_fast}, got {self.fast.base_channels}"
            )
        for i, width in enumerate(self.fast_stage_planes):
            if width < 1:
                raise ConfigError(
                    f"stage {i}: beta {self.beta} x slow width {self.slow_stage_planes[i]} "
                    f"rounds below one fast channel"
                )
        if self.fusion_kind not in FUSION_KINDS:
            raise ConfigError(f"fusion_kind must be one of {FUSION_KINDS}, got {self.fusion_kind!r}")
        if self.fusion_temporal_kernel < 1 or self.fusion_temporal_kernel % 2 == 0:
            raise ConfigError(
                f"fusion_temporal_kernel must be a positive odd integer, "
                f"got {self.fusion_temporal_kernel}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ConfigError(f"flip_prob must lie in [0, 1], got {self.flip_prob}")
        for name, stats in (("mean", self.mean), ("std", self.std)):
            if len(stats) != 3:
                raise ConfigError(f"{name} must have 3 per-channel entries, got {stats}")
        if any(s <= 0 for s in self.std):
            raise ConfigError(f"std entries must be positive, got {self.std}")

    # Derived geometry -----------------------------------------------------

    @property
    def slow_frames(self) -> int:
        return self.clip_len // self.slow.temporal_stride

    @property
    def fast_frames(self) -> int:
        return self.clip_len // self.fast.temporal_stride

    @property
    def stage_count(self) -> int:
        return len(self.backbone_depth)

    @property
    def slow_stage_planes(self) -> tuple[int, ...]:
        return tuple(self.slow.base_channels * 2**i for i in range(self.stage_count))

    @property
    def fast_stage_planes(self) -> tuple[int, ...]:
        return tuple(self.fast.base_channels * 2**i for i in range(self.stage_count))

    # Serialization ----------------------------------------------------------

    def to_mapping(self) -> dict[str, str]:
        """Flatten to an ordered {key: string-value} mapping."""
        m: dict[str, str] = {
            "num_classes": str(self.num_classes),
            "clip_len": str(self.clip_len),
            "crop_size": str(self.crop_size),
            "scale_short_side": str(self.scale_short_side),
            "alpha": str(self.alpha),
            "beta": repr(self.beta),
            "backbone_depth": ",".join(str(d) for d in self.backbone_depth),
            "fusion_kind": self.fusion_kind,
            "fusion_temporal_kernel": str(self.fusion_temporal_kernel),
            "dropout_rate": repr(self.dropout_rate),
            "flip_prob": repr(self.flip_prob),
            "mean": ",".join(repr(v) for v in self.mean),
            "std": ",".join(repr(v) for v in self.std),
        }
        for name, pw in (("slow", self.slow), ("fast", self.fast)):
            m[f"{name}.temporal_stride"] = str(pw.temporal_stride)
            m[f"{name}.base_channels"] = str(pw.base_channels)
            m[f"{name}.temporal_kernel_plan"] = ",".join(
                "1" if flag else "0" for flag in pw.temporal_kernel_plan
            )
            m[f"{name}.stem_temporal_kernel"] = str(pw.stem_temporal_kernel)
        return m

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "SlowFastConfig":
        """Rebuild from a flat mapping; unknown keys are errors, missing keys
        fall back to defaults. ``num_classes`` is required."""
        known = set(cls._mapping_keys())
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "num_classes" not in mapping:
            raise ConfigError("config is missing required key 'num_classes'")

        def get(key, parse, default):
            raw = mapping.get(key)
            if raw is None:
                return default
            try:
                return parse(raw)
            except ConfigError:
                raise
            except Exception as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None

        backbone = get("backbone_depth", _parse_int_tuple, (3, 4, 6, 3))
        pathways = {}
        for name, default in (
            ("slow", PathwayConfig(16, 64, (False, False, True, True), 1)),
            ("fast", PathwayConfig(2, 8, (True, True, True, True), 5)),
        ):
            default_plan = tuple(i >= len(backbone) - 2 for i in range(len(backbone)))
            if name == "fast":
                default_plan = (True,) * len(backbone)
            pathways[name] = PathwayConfig(
                temporal_stride=get(f"{name}.temporal_stride", int, default.temporal_stride),
                base_channels=get(f"{name}.base_channels", int, default.base_channels),
                temporal_kernel_plan=get(
                    f"{name}.temporal_kernel_plan", _parse_bool_tuple, default_plan
                ),
                stem_temporal_kernel=get(
                    f"{name}.stem_temporal_kernel", int, default.stem_temporal_kernel
                ),
            )
        return cls(
            num_classes=get("num_classes", int, None),
            clip_len=get("clip_len", int, 64),
            crop_size=get("crop_size", int, 224),
            scale_short_side=get("scale_short_side", int, 256),
            alpha=get("alpha", int, 8),
            beta=get("beta", float, 0.125),
            slow=pathways["slow"],
            fast=pathways["fast"],
            backbone_depth=backbone,
            fusion_kind=get("fusion_kind", str, "concatenate"),
            fusion_temporal_kernel=get("fusion_temporal_kernel", int, 5),
            dropout_rate=get("dropout_rate", float, 0.5),
            flip_prob=get("flip_prob", float, 0.5),
            mean=get("mean", _parse_float_triple, (0.45, 0.45, 0.45)),
            std=get("std", _parse_float_triple, (0.225, 0.225, 0.225)),
        )

    @classmethod
    def _mapping_keys(cls) -> list[str]:
        keys = [
            "num_classes", "clip_len", "crop_size", "scale_short_side", "alpha", "beta",
            "backbone_depth", "fusion_kind", "fusion_temporal_kernel", "dropout_rate",
            "flip_prob", "mean", "std",
        ]
        for name in ("slow", "fast"):
            keys += [
                f"{name}.temporal_stride", f"{name}.base_channels",
                f"{name}.temporal_kernel_plan", f"{name}.stem_temporal_kernel",
            ]
        return keys


def _parse_int_tuple(raw: str) -> tuple[int, ...]:
    return tuple(int(part) for part in raw.split(",") if part.strip() != "")


def _parse_bool_tuple(raw: str) -> tuple[bool, ...]:
    out = []
    for part in raw.split(","):
        part = part.strip().lower()
        if part in ("1", "true", "yes"):
            out.append(True)
        elif part in ("0", "false", "no"):
            out.append(False)
        else:
            raise ValueError(f"expected 0/1 flags, got {part!r}")
    return tuple(out)


def _parse_float_triple(raw: str) -> tuple[float, float, float]:
    parts = tuple(float(p) for p in raw.split(","))
    if len(parts) != 3:
        raise ValueError("expected three comma-separated numbers")
    return parts


def preset_config(name: str, num_classes: int, **overrides) -> SlowFastConfig:
    """Build a named architecture preset ("2x32", "4x16", "8x8").

    The name reads <slow frame count>x<slow stride>; the fast pathway samples
    alpha times as many frames with beta times the width. Keyword overrides
    (clip_len, crop_size, base_channels, backbone_depth, ...) shrink or reshape
    the network while keeping the preset's sampling structure.
    """
    if name not in PRESET_NAMES:
        hint = ""
        if name == "8x16":
            hint = " ('8x16' is not a supported configuration; the 8-frame preset is '8x8')"
        raise ConfigError(f"unknown preset {name!r}; supported presets: {', '.join(PRESET_NAMES)}{hint}")
    slow_count, slow_stride = (int(p) for p in name.split("x"))

    alpha = int(overrides.pop("alpha", 8))
    beta = float(overrides.pop("beta", 0.125))
    base_channels = int(overrides.pop("base_channels", 64))
    backbone_depth = tuple(overrides.pop("backbone_depth", (3, 4, 6, 3)))
    clip_len = int(overrides.pop("clip_len", slow_count * slow_stride))
    if clip_len != slow_count * slow_stride:
        raise ConfigError(
            f"preset {name} requires clip_len = {slow_count * slow_stride}, got {clip_len}"
        )
    if slow_stride % alpha != 0:
        raise ConfigError(
            f"preset {name}: slow stride {slow_stride} is not divisible by alpha {alpha}"
        )
    stages = len(backbone_depth)
    slow = PathwayConfig(
        temporal_stride=slow_stride,
        base_channels=base_channels,
        temporal_kernel_plan=tuple(i >= stages - 2 for i in range(stages)),
        stem_temporal_kernel=1,
    )
    fast = PathwayConfig(
        temporal_stride=slow_stride // alpha,
        base_channels=round_half_up(beta * base_channels),
        temporal_kernel_plan=(True,) * stages,
        stem_temporal_kernel=5,
    )
    return SlowFastConfig(
        num_classes=num_classes,
        clip_len=clip_len,
        alpha=alpha,
        beta=beta,
        slow=slow,
        fast=fast,
        backbone_depth=backbone_depth,
        **overrides,
    )


def parse_preset_overrides(mapping: dict[str, str]) -> dict:
    """Parse the string overrides accepted alongside a preset name.

    Only whole-network knobs may ride on a preset; per-pathway details
    (slow.*, fast.*) require a full explicit configuration.
    """
    parsers = {
        "clip_len": int, "crop_size": int, "scale_short_side": int,
        "alpha": int, "beta": float, "base_channels": int,
        "backbone_depth": _parse_int_tuple,
        "fusion_kind": str, "fusion_temporal_kernel": int,
        "dropout_rate": float, "flip_prob": float,
        "mean": _parse_float_triple, "std": _parse_float_triple,
    }
    out = {}
    for key, raw in mapping.items():
        if key not in parsers:
            raise ConfigError(
                f"key {key!r} cannot be combined with a preset; drop 'preset' "
                f"and give the full configuration instead"
            )
        try:
            out[key] = parsers[key](raw)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None
    return out


# Flat key = value files ----------------------------------------------------


def read_kv_file(path) -> dict[str, str]:
    """Read a ``key = value`` text file; '#' starts a comment, order kept."""
    mapping: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in mapping:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        mapping[key] = value.strip()
    return mapping


def write_kv_file(path, mapping: dict[str, str], header: str | None = None) -> Path:
    path = Path(path)
    lines = []
    if header:
        lines += [f"# {line}" for line in header.splitlines()]
    lines += [f"{key} = {value}" for key, value in mapping.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
