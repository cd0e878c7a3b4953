"""Dataset handling: manifests, splits, decoding, preprocessing, statistics."""

from .manifest import (
    THETIS_CLASSES,
    DatasetManifest,
    ManifestError,
    VideoRecord,
    load_manifest,
    save_manifest,
)
from .splits import SplitError, assign_splits, split_quota
from .clips import (
    DecodeError,
    cached_decode,
    decode_video,
    enumerate_test_views,
    normalize_clip,
    preprocess_clip,
    scale_shortest_side,
    spatial_crop,
    temporal_indices,
    write_video_array,
)
from .stats import class_length_histogram, render_histogram
from .synthetic import (
    MOTION_CLASSES,
    make_motion_corpus,
    make_noise_corpus,
    make_thetis_like_manifest,
    moving_blob_frames,
)

__all__ = [
    "THETIS_CLASSES", "DatasetManifest", "ManifestError", "VideoRecord",
    "load_manifest", "save_manifest",
    "SplitError", "assign_splits", "split_quota",
    "DecodeError", "cached_decode", "decode_video", "enumerate_test_views",
    "normalize_clip", "preprocess_clip", "scale_shortest_side", "spatial_crop",
    "temporal_indices", "write_video_array",
    "class_length_histogram", "render_histogram",
    "MOTION_CLASSES", "make_motion_corpus", "make_noise_corpus",
    "make_thetis_like_manifest", "moving_blob_frames",
]
