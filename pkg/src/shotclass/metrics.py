"""Performance measures and the summed-view test ensemble.

Accuracy is 100 x correct / total; error rate is its exact complement.
Test-time scoring runs the network on all six deterministic views of a
video and sums the per-view score vectors before the argmax. Scores are
summed post-softmax by default (bounded and comparable across views); a
logit-sum variant is available for ablation. Argmax ties resolve to the
lowest class index.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import SlowFastConfig
from .data.clips import enumerate_test_views, preprocess_clip
from .data.manifest import VideoRecord

__all__ = ["MetricError", "PredictionRecord", "BinaryCounts", "ConfusionMatrix",
           "accuracy", "error_rate", "confusion_matrix", "per_class_accuracy",
           "combine_view_scores", "ensemble_predict", "predict_single_clip",
           "write_predictions", "read_predictions", "render_confusion"]


class MetricError(ValueError):
    pass


def _argmax_lowest(scores) -> int:
    # np.argmax already returns the first (lowest) index on ties
    return int(np.argmax(np.asarray(scores)))


@dataclass(frozen=True)
class PredictionRecord:
    video_id: str
    true_label: int
    predicted_label: int
    score_vector: tuple[float, ...]
    views_used: int = 1

    def __post_init__(self):
        if not self.score_vector:
            raise MetricError(f"record {self.video_id!r}: empty score vector")
        want = _argmax_lowest(self.score_vector)
        if self.predicted_label != want:
            raise MetricError(
                f"record {self.video_id!r}: predicted_label {self.predicted_label} "
                f"is not the argmax of its scores (expected {want})"
            )
        if self.views_used < 1:
            raise MetricError(f"record {self.video_id!r}: views_used must be >= 1")

    @property
    def correct(self) -> bool:
        return self.true_label == self.predicted_label


@dataclass(frozen=True)
class BinaryCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise MetricError("binary counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def accuracy(self) -> float:
        if self.total == 0:
            raise MetricError("no outcomes counted")
        return 100.0 * (self.tp + self.tn) / self.total

    def error_rate(self) -> float:
        if self.total == 0:
            raise MetricError("no outcomes counted")
        return 100.0 * (self.fp + self.fn) / self.total


def accuracy(records: list[PredictionRecord]) -> float:
    """Percent of records whose prediction matches the true label."""
    if not records:
        raise MetricError("accuracy of an empty record set is undefined")
    return 100.0 * sum(r.correct for r in records) / len(records)


def error_rate(records: list[PredictionRecord]) -> float:
    """Percent misclassified; accuracy + error_rate = 100 exactly."""
    if not records:
        raise MetricError("error rate of an empty record set is undefined")
    return 100.0 * sum(not r.correct for r in records) / len(records)


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: tuple[tuple[int, ...], ...]  # [true][predicted]
    class_names: tuple[str, ...]

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    @property
    def trace(self) -> int:
        return sum(self.counts[i][i] for i in range(len(self.counts)))


def confusion_matrix(records: list[PredictionRecord], class_names) -> ConfusionMatrix:
    names = tuple(class_names)
    n = len(names)
    grid = [[0] * n for _ in range(n)]
    for rec in records:
        if not (0 <= rec.true_label < n) or not (0 <= rec.predicted_label < n):
            raise MetricError(
                f"record {rec.video_id!r}: labels ({rec.true_label}, "
                f"{rec.predicted_label}) outside class range 0..{n - 1}"
            )
        grid[rec.true_label][rec.predicted_label] += 1
    return ConfusionMatrix(tuple(tuple(row) for row in grid), names)


def per_class_accuracy(cm: ConfusionMatrix) -> list[float | None]:
    """Diagonal over row sum, percent, per class; None where a class has no
    records (undefined, deliberately not 0 or 100)."""
    out: list[float | None] = []
    for i, row in enumerate(cm.counts):
        total = sum(row)
        out.append(100.0 * row[i] / total if total else None)
    return out


def render_confusion(cm: ConfusionMatrix) -> str:
    """Delimited text, class names on both axes, rows are true classes."""
    buf = io.StringIO()
    buf.write("true\\pred\t" + "\t".join(cm.class_names) + "\n")
    for name, row in zip(cm.class_names, cm.counts):
        buf.write(name + "\t" + "\t".join(str(c) for c in row) + "\n")
    return buf.getvalue()


def combine_view_scores(view_scores, sum_domain: str = "probability") -> np.ndarray:
    """Sum per-view score vectors into one ensemble vector.

    view_scores: (views, classes) raw logits. "probability" applies softmax
    per view before summation; "logit" sums the raw rows.
    """
    arr = np.asarray(view_scores, dtype=np.float64)
    if arr.ndim != 2:
        raise MetricError(f"expected (views, classes) scores, got shape {arr.shape}")
    if sum_domain == "probability":
        shifted = arr - arr.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        arr = exp / exp.sum(axis=1, keepdims=True)
    elif sum_domain != "logit":
        raise MetricError(f"sum_domain must be 'probability' or 'logit', got {sum_domain!r}")
    return arr.sum(axis=0)


def _score_views(model: torch.nn.Module, views: list[torch.Tensor]) -> np.ndarray:
    model.eval()
    with torch.no_grad():
        logits = model(torch.stack(views))
    return logits.double().cpu().numpy()


def ensemble_predict(
    model: torch.nn.Module,
    record: VideoRecord,
    class_names,
    config: SlowFastConfig | None = None,
    cache_dir=None,
    frames=None,
    sum_domain: str = "probability",
) -> PredictionRecord:
    """Score a video with the six-view summed ensemble. Any undecodable view
    fails the whole video; partial ensembles would bias comparisons."""
    names = tuple(class_names)
    views = enumerate_test_views(record, config=config, cache_dir=cache_dir, frames=frames)
    combined = combine_view_scores(_score_views(model, views), sum_domain)
    return PredictionRecord(
        video_id=record.id,
        true_label=names.index(record.class_label),
        predicted_label=_argmax_lowest(combined),
        score_vector=tuple(float(s) for s in combined),
        views_used=len(views),
    )


def predict_single_clip(
    model: torch.nn.Module,
    record: VideoRecord,
    class_names,
    rng: np.random.Generator,
    config: SlowFastConfig | None = None,
    cache_dir=None,
    frames=None,
) -> PredictionRecord:
    """Score a video from one randomly positioned clip (the validation
    policy); scores are softmax probabilities."""
    names = tuple(class_names)
    clip = preprocess_clip(record, "eval", rng=rng, config=config,
                           cache_dir=cache_dir, frames=frames)
    combined = combine_view_scores(_score_views(model, [clip]))
    return PredictionRecord(
        video_id=record.id,
        true_label=names.index(record.class_label),
        predicted_label=_argmax_lowest(combined),
        score_vector=tuple(float(s) for s in combined),
        views_used=1,
    )


def write_predictions(path, records: list[PredictionRecord], class_names) -> Path:
    """Line-delimited prediction export: one record per row, scores repr'd
    so they round-trip exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = tuple(class_names)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["video_id", "true", "pred", "views_used",
                     *(f"score_{n}" for n in names)])
    for rec in records:
        if len(rec.score_vector) != len(names):
            raise MetricError(
                f"record {rec.video_id!r} has {len(rec.score_vector)} scores "
                f"for {len(names)} classes"
            )
        writer.writerow([rec.video_id, rec.true_label, rec.predicted_label,
                         rec.views_used, *(repr(s) for s in rec.score_vector)])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_predictions(path) -> tuple[list[PredictionRecord], tuple[str, ...]]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MetricError(f"{path}: empty prediction file")
    header = rows[0]
    if header[:4] != ["video_id", "true", "pred", "views_used"]:
        raise MetricError(f"{path}: unrecognized prediction header {header[:4]}")
    names = tuple(h.removeprefix("score_") for h in header[4:])
    records = []
    for row in rows[1:]:
        if len(row) != 4 + len(names):
            raise MetricError(f"{path}: row for {row[0]!r} has {len(row)} fields")
        records.append(PredictionRecord(
            video_id=row[0], true_label=int(row[1]), predicted_label=int(row[2]),
            views_used=int(row[3]), score_vector=tuple(float(s) for s in row[4:]),
        ))
    return records, names
