"""Manifest-driven dataset catalog.

A manifest is one delimited text file describing every video in a corpus
(schema version 1):

    # shotclass-manifest: 1
    # classes: <comma-separated ordered class names>
    # source: <free text, optional>
    id,path,class,player,frames,duration,split

``split`` is one of train/val/test/unassigned (empty means unassigned).
Relative paths resolve against the manifest file's directory. The class
directive fixes the class list and its order; a record whose label is not
declared there fails the load, naming the offending line.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

__all__ = ["ManifestError", "VideoRecord", "DatasetManifest", "THETIS_CLASSES",
           "SPLIT_NAMES", "load_manifest", "save_manifest"]

MANIFEST_VERSION = 1
MANIFEST_HEADER = ("id", "path", "class", "player", "frames", "duration", "split")
SPLIT_NAMES = ("train", "val", "test", "unassigned")

# The twelve tennis-shot classes of the standard 1980-video corpus.
THETIS_CLASSES = (
    "backhand",
    "backhand2hands",
    "backhand_slice",
    "backhand_volley",
    "flat_service",
    "forehand_flat",
    "forehand_openstands",
    "forehand_slice",
    "forehand_volley",
    "kick_service",
    "slice_service",
    "smash",
)


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class VideoRecord:
    id: str
    path: str
    class_label: str
    player_id: str
    frame_count: int
    duration: float
    split: str = "unassigned"


@dataclass
class DatasetManifest:
    classes: tuple[str, ...]
    records: list[VideoRecord] = field(default_factory=list)
    source_note: str = ""

    def class_index(self, name: str) -> int:
        try:
            return self.classes.index(name)
        except ValueError:
            raise ManifestError(f"unknown class label {name!r}") from None

    def class_counts(self) -> dict[str, int]:
        counts = {c: 0 for c in self.classes}
        for rec in self.records:
            counts[rec.class_label] += 1
        return counts

    def records_for_split(self, split: str) -> list[VideoRecord]:
        if split not in SPLIT_NAMES:
            raise ManifestError(f"unknown split {split!r}; expected one of {SPLIT_NAMES}")
        return [r for r in self.records if r.split == split]

    def with_splits(self, assignment: dict[str, str]) -> "DatasetManifest":
        """Copy of the manifest with split fields replaced per the assignment
        map (record id -> split name); ids absent from the map keep theirs."""
        records = [
            replace(r, split=assignment.get(r.id, r.split)) for r in self.records
        ]
        return DatasetManifest(self.classes, records, self.source_note)


def load_manifest(path) -> DatasetManifest:
    """Parse and validate a manifest file. Any malformed line fails the load
    with the line number and offending record identified."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc

    classes: tuple[str, ...] | None = None
    source_note = ""
    data_lines: list[tuple[int, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped.lstrip("#").strip()
            if body.startswith("shotclass-manifest:"):
                version = body.partition(":")[2].strip()
                if version != str(MANIFEST_VERSION):
                    raise ManifestError(
                        f"{path}:{lineno}: unsupported manifest version {version!r}"
                    )
            elif body.startswith("classes:"):
                names = [c.strip() for c in body.partition(":")[2].split(",") if c.strip()]
                if len(set(names)) != len(names):
                    dupes = sorted({n for n in names if names.count(n) > 1})
                    raise ManifestError(f"{path}:{lineno}: duplicate class names {dupes}")
                classes = tuple(names)
            elif body.startswith("source:"):
                source_note = body.partition(":")[2].strip()
            continue
        data_lines.append((lineno, line))

    if classes is None:
        raise ManifestError(f"{path}: missing '# classes:' directive")
    if not data_lines:
        raise ManifestError(f"{path}: missing header row {','.join(MANIFEST_HEADER)}")

    header_lineno, header_line = data_lines[0]
    header = next(csv.reader([header_line]))
    if tuple(h.strip() for h in header) != MANIFEST_HEADER:
        raise ManifestError(
            f"{path}:{header_lineno}: expected header {','.join(MANIFEST_HEADER)}, "
            f"got {header_line.strip()!r}"
        )

    records: list[VideoRecord] = []
    seen_ids: set[str] = set()
    base = path.parent
    for lineno, line in data_lines[1:]:
        row = next(csv.reader([line]))
        if len(row) != len(MANIFEST_HEADER):
            raise ManifestError(
                f"{path}:{lineno}: expected {len(MANIFEST_HEADER)} fields, got {len(row)}"
            )
        rec_id, rec_path, label, player, frames_raw, duration_raw, split = (
            f.strip() for f in row
        )
        if not rec_id:
            raise ManifestError(f"{path}:{lineno}: empty record id")
        if rec_id in seen_ids:
            raise ManifestError(f"{path}:{lineno}: duplicate record id {rec_id!r}")
        if label not in classes:
            raise ManifestError(
                f"{path}:{lineno}: record {rec_id!r} has label {label!r} "
                f"not in the declared class list"
            )
        try:
            frame_count = int(frames_raw)
            duration = float(duration_raw)
        except ValueError:
            raise ManifestError(
                f"{path}:{lineno}: record {rec_id!r} has non-numeric frames/duration"
            ) from None
        if frame_count <= 0:
            raise ManifestError(f"{path}:{lineno}: record {rec_id!r} has frame_count <= 0")
        if duration <= 0:
            raise ManifestError(f"{path}:{lineno}: record {rec_id!r} has duration <= 0")
        split = split or "unassigned"
        if split not in SPLIT_NAMES:
            raise ManifestError(
                f"{path}:{lineno}: record {rec_id!r} has unknown split {split!r}"
            )
        resolved = Path(rec_path)
        if not resolved.is_absolute():
            # absolutize so the record keeps pointing at the same file even
            # if a split-annotated copy of the manifest is saved elsewhere
            resolved = Path(os.path.abspath(base / resolved))
        seen_ids.add(rec_id)
        records.append(VideoRecord(
            id=rec_id, path=str(resolved), class_label=label, player_id=player,
            frame_count=frame_count, duration=duration, split=split,
        ))
    return DatasetManifest(classes=classes, records=records, source_note=source_note)


def save_manifest(path, manifest: DatasetManifest) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(f"# shotclass-manifest: {MANIFEST_VERSION}\n")
    buf.write(f"# classes: {','.join(manifest.classes)}\n")
    if manifest.source_note:
        buf.write(f"# source: {manifest.source_note}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_HEADER)
    for rec in manifest.records:
        writer.writerow([
            rec.id, rec.path, rec.class_label, rec.player_id,
            rec.frame_count, repr(rec.duration), rec.split,
        ])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path
