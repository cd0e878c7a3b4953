"""Two-pathway spatiotemporal classification network.

One pathway samples the input clip sparsely and carries most of the channel
capacity (spatial semantics); the other samples densely with few channels
(motion). Between residual stages, fast-stream features pass through a
temporally strided convolution and fuse into the slow stream. Both final
feature maps are globally average-pooled, concatenated, and linearly
classified.

A built network is immutable after construction except during an explicit
optimization step; inference on shared read-only weights is safe from any
number of concurrent workers, while training must be serialized to one
logical writer.
"""

from __future__ import annotations

import torch
from torch import nn

from shotclass.config import ConfigError, SlowFastConfig

__all__ = [
    "GeometryError",
    "SlowFast",
    "Bottleneck3d",
    "LateralConnection",
    "PathwayStem",
    "sample_pathway_frames",
    "lateral_fuse",
    "build_slowfast",
    "BOTTLENECK_EXPANSION",
]

BOTTLENECK_EXPANSION = 4  # stage output channels = stage width x this


class GeometryError(ValueError):
    """Input tensor shape does not match the configured clip geometry."""


def sample_pathway_frames(clip: torch.Tensor, stride: int, offset: int = 0) -> torch.Tensor:
    """Subsample the time axis of a (..., C, T, H, W) clip tensor.

    Keeps frames offset, offset+stride, offset+2*stride, ... in order. The
    stride must divide the clip length exactly; anything else is rejected
    rather than silently truncated.
    """
    if clip.dim() < 4:
        raise GeometryError(f"expected a (..., C, T, H, W) tensor, got {tuple(clip.shape)}")
    t = clip.shape[-3]
    if stride < 1:
        raise GeometryError(f"stride must be >= 1, got {stride}")
    if t % stride != 0:
        raise GeometryError(
            f"stride {stride} does not divide clip length {t}; refusing to truncate"
        )
    if not 0 <= offset < stride:
        raise GeometryError(f"offset must lie in [0, {stride}), got {offset}")
    index = torch.arange(offset, t, stride, device=clip.device)
    return clip.index_select(-3, index)


class PathwayStem(nn.Module):
    """Entry convolution of one pathway: 7x7 spatial, stride 2, then a 3x3
    spatial max-pool; no temporal downsampling."""

    def __init__(self, out_channels: int, temporal_kernel: int = 1):
        super().__init__()
        tk = temporal_kernel
        self.conv = nn.Conv3d(
            3, out_channels, (tk, 7, 7), stride=(1, 2, 2), padding=(tk // 2, 3, 3), bias=False
        )
        self.bn = nn.BatchNorm3d(out_channels)
        self.relu = nn.ReLU(inplace=True)
        self.pool = nn.MaxPool3d((1, 3, 3), stride=(1, 2, 2), padding=(0, 1, 1))

    def forward(self, x):
        return self.pool(self.relu(self.bn(self.conv(x))))


class Bottleneck3d(nn.Module):
    """Residual bottleneck: 1x1x1 / 1x3x3 / 1x1x1 convolutions, optionally
    giving the first one a temporal extent of 3. Time is never strided."""

    def __init__(self, in_channels: int, planes: int, spatial_stride: int = 1,
                 temporal_kernel: int = 1):
        super().__init__()
        out_channels = planes * BOTTLENECK_EXPANSION
        tk = temporal_kernel
        self.conv1 = nn.Conv3d(in_channels, planes, (tk, 1, 1), padding=(tk // 2, 0, 0), bias=False)
        self.bn1 = nn.BatchNorm3d(planes)
        self.conv2 = nn.Conv3d(
            planes, planes, (1, 3, 3),
            stride=(1, spatial_stride, spatial_stride), padding=(0, 1, 1), bias=False,
        )
        self.bn2 = nn.BatchNorm3d(planes)
        self.conv3 = nn.Conv3d(planes, out_channels, 1, bias=False)
        self.bn3 = nn.BatchNorm3d(out_channels)
        self.relu = nn.ReLU(inplace=True)
        if spatial_stride != 1 or in_channels != out_channels:
            self.downsample = nn.Sequential(
                nn.Conv3d(in_channels, out_channels, 1,
                          stride=(1, spatial_stride, spatial_stride), bias=False),
                nn.BatchNorm3d(out_channels),
            )
        else:
            self.downsample = None

    def forward(self, x):
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.relu(self.bn2(self.conv2(out)))
        out = self.bn3(self.conv3(out))
        return self.relu(out + identity)


def _make_stage(in_channels: int, planes: int, blocks: int, spatial_stride: int,
                temporal_kernel: int) -> nn.Sequential:
    layers = [Bottleneck3d(in_channels, planes, spatial_stride, temporal_kernel)]
    out_channels = planes * BOTTLENECK_EXPANSION
    layers += [
        Bottleneck3d(out_channels, planes, 1, temporal_kernel) for _ in range(blocks - 1)
    ]
    return nn.Sequential(*layers)


class LateralConnection(nn.Module):
    """Carries fast-stream features into the slow stream.

    The fast features pass through a temporal convolution (kernel extent
    ``temporal_kernel``, temporal stride alpha) so their frame count matches
    the slow stream, then fuse by channel concatenation (transform output
    width 2x the fast width) or element-wise sum (transform output width
    equal to the slow width, which summation forces).
    """

    def __init__(self, fast_channels: int, slow_channels: int, alpha: int,
                 temporal_kernel: int = 5, kind: str = "concatenate"):
        super().__init__()
        if kind == "concatenate":
            out_channels = 2 * fast_channels
        elif kind == "sum":
            out_channels = slow_channels
        else:
            raise ConfigError(f"unknown fusion kind {kind!r}")
        self.kind = kind
        self.alpha = alpha
        self.out_channels = out_channels
        tk = temporal_kernel
        self.conv = nn.Conv3d(
            fast_channels, out_channels, (tk, 1, 1),
            stride=(alpha, 1, 1), padding=(tk // 2, 0, 0), bias=False,
        )
        self.bn = nn.BatchNorm3d(out_channels)
        self.relu = nn.ReLU(inplace=True)

    def fused_slow_channels(self, slow_channels: int) -> int:
        if self.kind == "concatenate":
            return slow_channels + self.out_channels
        return slow_channels

    def forward(self, fast: torch.Tensor, slow: torch.Tensor) -> torch.Tensor:
        if fast.shape[-3] != self.alpha * slow.shape[-3]:
            raise GeometryError(
                f"fast frame count {fast.shape[-3]} is not alpha ({self.alpha}) x "
                f"slow frame count {slow.shape[-3]}"
            )
        if fast.shape[-2:] != slow.shape[-2:]:
            raise GeometryError(
                f"spatial extents differ: fast {tuple(fast.shape[-2:])} vs "
                f"slow {tuple(slow.shape[-2:])}"
            )
        transformed = self.relu(self.bn(self.conv(fast)))
        if self.kind == "concatenate":
            return torch.cat([slow, transformed], dim=-4)
        return slow + transformed


def lateral_fuse(fast_feat: torch.Tensor, slow_feat: torch.Tensor,
                 connection: LateralConnection) -> torch.Tensor:
    """Fuse fast-stream features into the slow stream through ``connection``."""
    return connection(fast_feat, slow_feat)


class SlowFast(nn.Module):
    """The two-pathway network. Forward maps a clip tensor of shape
    (3, clip_len, crop, crop) or (B, 3, clip_len, crop, crop) to raw logits
    of length ``num_classes``."""

    def __init__(self, config: SlowFastConfig):
        super().__init__()
        config.validate()
        self.config = config
        stages = config.stage_count
        slow_planes = config.slow_stage_planes
        fast_planes = config.fast_stage_planes

        self.slow_stem = PathwayStem(config.slow.base_channels, config.slow.stem_temporal_kernel)
        self.fast_stem = PathwayStem(config.fast.base_channels, config.fast.stem_temporal_kernel)

        # Channel widths of each stream at the fusion points: after the stem,
        # then after every stage except the last.
        slow_in = config.slow.base_channels
        fast_in = config.fast.base_channels
        laterals = []
        slow_stages = []
        fast_stages = []
        for i in range(stages):
            lat = LateralConnection(
                fast_in, slow_in, config.alpha,
                config.fusion_temporal_kernel, config.fusion_kind,
            )
            laterals.append(lat)
            spatial_stride = 1 if i == 0 else 2
            slow_tk = 3 if config.slow.temporal_kernel_plan[i] else 1
            fast_tk = 3 if config.fast.temporal_kernel_plan[i] else 1
            slow_stages.append(_make_stage(
                lat.fused_slow_channels(slow_in), slow_planes[i],
                config.backbone_depth[i], spatial_stride, slow_tk,
            ))
            fast_stages.append(_make_stage(
                fast_in, fast_planes[i], config.backbone_depth[i], spatial_stride, fast_tk,
            ))
            slow_in = slow_planes[i] * BOTTLENECK_EXPANSION
            fast_in = fast_planes[i] * BOTTLENECK_EXPANSION
        self.laterals = nn.ModuleList(laterals)
        self.slow_stages = nn.ModuleList(slow_stages)
        self.fast_stages = nn.ModuleList(fast_stages)

        self.dropout = nn.Dropout(config.dropout_rate)
        self.fc = nn.Linear(slow_in + fast_in, config.num_classes)
        self._init_weights()

    def _init_weights(self):
        for m in self.modules():
            if isinstance(m, nn.Conv3d):
                nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")
            elif isinstance(m, nn.BatchNorm3d):
                nn.init.ones_(m.weight)
                nn.init.zeros_(m.bias)
        nn.init.normal_(self.fc.weight, 0.0, 0.01)
        nn.init.zeros_(self.fc.bias)

    def stage_out_channels(self) -> list[tuple[int, int]]:
        """(slow, fast) channel widths at each stage output, fusion aside."""
        return [
            (s * BOTTLENECK_EXPANSION, f * BOTTLENECK_EXPANSION)
            for s, f in zip(self.config.slow_stage_planes, self.config.fast_stage_planes)
        ]

    def _check_geometry(self, clip: torch.Tensor):
        cfg = self.config
        if clip.dim() != 5:
            raise GeometryError(f"expected (B, 3, T, H, W), got shape {tuple(clip.shape)}")
        b, c, t, h, w = clip.shape
        if c != 3:
            raise GeometryError(f"expected 3 input channels, got {c}")
        if t != cfg.clip_len:
            raise GeometryError(f"expected clip length {cfg.clip_len}, got {t}")
        if h != cfg.crop_size or w != cfg.crop_size:
            raise GeometryError(
                f"expected {cfg.crop_size}x{cfg.crop_size} frames, got {h}x{w}"
            )

    def features(self, clip: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Run the backbone; returns the final pre-pool (slow, fast) feature
        maps, each (B, C, T, H', W')."""
        unbatched = clip.dim() == 4
        if unbatched:
            clip = clip.unsqueeze(0)
        self._check_geometry(clip)
        slow = sample_pathway_frames(clip, self.config.slow.temporal_stride)
        fast = sample_pathway_frames(clip, self.config.fast.temporal_stride)
        slow = self.slow_stem(slow)
        fast = self.fast_stem(fast)
        for lat, slow_stage, fast_stage in zip(self.laterals, self.slow_stages, self.fast_stages):
            slow = lat(fast, slow)
            slow = slow_stage(slow)
            fast = fast_stage(fast)
        if unbatched:
            return slow.squeeze(0), fast.squeeze(0)
        return slow, fast

    def forward(self, clip: torch.Tensor) -> torch.Tensor:
        unbatched = clip.dim() == 4
        if unbatched:
            clip = clip.unsqueeze(0)
        slow, fast = self.features(clip)
        pooled = torch.cat([slow.mean(dim=(2, 3, 4)), fast.mean(dim=(2, 3, 4))], dim=1)
        logits = self.fc(self.dropout(pooled))
        return logits.squeeze(0) if unbatched else logits


def build_slowfast(config: SlowFastConfig) -> SlowFast:
    """Construct a network from a validated configuration."""
    return SlowFast(config)
