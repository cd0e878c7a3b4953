"""Error triage: collect misclassified videos, record human category
assignments, and report category percentages.

The store is an append-only assignment log plus a derived current view.
Re-assigning a case overwrites its current categories but every prior
assignment stays in the history. Percentages always use the full error
count (reviewed or not) as denominator, so they are comparable while a
review is still in progress; multi-category cases make the percents sum
past 100 by design.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .metrics import MetricError, PredictionRecord

__all__ = ["TriageError", "CaseNotFound", "ErrorCase", "CategoryAssignment",
           "CategoryReport", "TriageStore", "collect_errors", "rank_categories",
           "render_category_report", "DEFAULT_CATEGORIES", "EFFORT_WEIGHTS",
           "load_store", "save_store"]

# seed taxonomy; reviewers add more as they go
DEFAULT_CATEGORIES = (
    "serve confusion",
    "slice/volley confusion",
    "smash/serve confusion",
    "beginners",
    "others",
)

EFFORT_WEIGHTS = {"low": 1.0, "med": 2.0, "high": 3.0}

STORE_VERSION = 1


class TriageError(ValueError):
    pass


class CaseNotFound(TriageError):
    pass


@dataclass(frozen=True)
class ErrorCase:
    video_id: str
    true_label: str
    predicted_label: str
    score_vector: tuple[float, ...]
    review_status: str = "unreviewed"

    def __post_init__(self):
        if self.true_label == self.predicted_label:
            raise TriageError(
                f"case {self.video_id!r} is not an error: predicted its true "
                f"label {self.true_label!r}"
            )
        if self.review_status not in ("unreviewed", "reviewed"):
            raise TriageError(f"bad review_status {self.review_status!r}")

    @property
    def wrong_confidence(self) -> float:
        """Share of total score mass on the (wrong) predicted class."""
        total = sum(self.score_vector)
        if total <= 0:
            return 0.0
        idx = max(range(len(self.score_vector)), key=lambda i: self.score_vector[i])
        return self.score_vector[idx] / total


@dataclass(frozen=True)
class CategoryAssignment:
    video_id: str
    categories: tuple[str, ...]
    comment: str = ""
    reviewer: str = ""
    timestamp: float = 0.0

    def __post_init__(self):
        if not self.categories:
            raise TriageError(f"assignment for {self.video_id!r} has no categories")


@dataclass(frozen=True)
class CategoryReport:
    rows: tuple[tuple[str, int, float], ...]  # (category, count, percent)
    total_errors: int
    reviewed: int
    source_split: str = ""

    @property
    def unreviewed(self) -> int:
        return self.total_errors - self.reviewed

    @property
    def empty(self) -> bool:
        return self.total_errors == 0


def collect_errors(records: list[PredictionRecord], class_names) -> list[ErrorCase]:
    """Misclassified records as triage cases, most confidently wrong first
    (ties broken by video id so the queue is reproducible)."""
    names = tuple(class_names)
    cases = []
    for rec in records:
        if rec.correct:
            continue
        try:
            true_name = names[rec.true_label]
            pred_name = names[rec.predicted_label]
        except IndexError:
            raise MetricError(
                f"record {rec.video_id!r}: label outside class range"
            ) from None
        cases.append(ErrorCase(rec.video_id, true_name, pred_name, rec.score_vector))
    cases.sort(key=lambda c: (-c.wrong_confidence, c.video_id))
    return cases


class TriageStore:
    """Error cases plus their assignment log.

    Mutations go through assign(); the current view of a case is its
    latest assignment (by timestamp, arrival order breaking ties), but the
    full log is kept and never shrinks.
    """

    def __init__(self, cases: list[ErrorCase], source_split: str = "",
                 categories=DEFAULT_CATEGORIES,
                 media_paths: dict[str, str] | None = None,
                 class_names=()):
        ids = [c.video_id for c in cases]
        if len(set(ids)) != len(ids):
            raise TriageError("duplicate case ids in triage store")
        self._cases = {c.video_id: c for c in cases}
        self._order = ids
        self._log: list[CategoryAssignment] = []
        self.source_split = source_split
        self.categories: list[str] = list(dict.fromkeys(categories))
        self.media_paths = dict(media_paths or {})
        self.class_names = tuple(class_names)

    def __len__(self) -> int:
        return len(self._order)

    def case_ids(self) -> list[str]:
        return list(self._order)

    def case(self, video_id: str) -> ErrorCase:
        try:
            base = self._cases[video_id]
        except KeyError:
            raise CaseNotFound(f"no triage case with id {video_id!r}") from None
        status = "reviewed" if self.current_assignment(video_id) else "unreviewed"
        return ErrorCase(base.video_id, base.true_label, base.predicted_label,
                         base.score_vector, status)

    def cases(self, status: str | None = None,
              true_class: str | None = None) -> list[ErrorCase]:
        out = [self.case(vid) for vid in self._order]
        if status is not None:
            if status not in ("unreviewed", "reviewed"):
                raise TriageError(f"bad status filter {status!r}")
            out = [c for c in out if c.review_status == status]
        if true_class is not None:
            out = [c for c in out if c.true_label == true_class]
        return out

    def register_category(self, name: str) -> None:
        name = name.strip()
        if not name:
            raise TriageError("category name is empty")
        if name not in self.categories:
            self.categories.append(name)

    def assign(self, video_id: str, categories, comment: str = "",
               reviewer: str = "", timestamp: float | None = None) -> ErrorCase:
        """Record an assignment. Unknown categories are registered on the
        fly; re-assignment overwrites the current view, never the log."""
        if video_id not in self._cases:
            raise CaseNotFound(f"no triage case with id {video_id!r}")
        cats = tuple(dict.fromkeys(c.strip() for c in categories if c.strip()))
        if not cats:
            raise TriageError("assignment needs at least one category")
        entry = CategoryAssignment(
            video_id=video_id, categories=cats, comment=comment,
            reviewer=reviewer,
            timestamp=time.time() if timestamp is None else float(timestamp),
        )
        for c in cats:
            self.register_category(c)
        self._log.append(entry)
        return self.case(video_id)

    def history(self, video_id: str) -> list[CategoryAssignment]:
        if video_id not in self._cases:
            raise CaseNotFound(f"no triage case with id {video_id!r}")
        return [a for a in self._log if a.video_id == video_id]

    def current_assignment(self, video_id: str) -> CategoryAssignment | None:
        entries = self.history(video_id)
        if not entries:
            return None
        # max() keeps the later log entry on timestamp ties
        return max(enumerate(entries), key=lambda t: (t[1].timestamp, t[0]))[1]

    @property
    def log(self) -> list[CategoryAssignment]:
        return list(self._log)

    def report(self) -> CategoryReport:
        """Current category counts over all error cases. Counts come from
        each case's latest assignment only."""
        counts = {c: 0 for c in self.categories}
        reviewed = 0
        for vid in self._order:
            current = self.current_assignment(vid)
            if current is None:
                continue
            reviewed += 1
            for c in current.categories:
                counts[c] += 1
        total = len(self._order)
        rows = tuple(
            (name, count, 100.0 * count / total if total else 0.0)
            for name, count in counts.items()
        )
        rows = tuple(sorted(rows, key=lambda r: (-r[2], r[0])))
        return CategoryReport(rows=rows, total_errors=total, reviewed=reviewed,
                              source_split=self.source_split)


def rank_categories(report: CategoryReport, effort_estimates=None) -> list[str]:
    """Categories ordered by elimination potential.

    Without effort estimates: percent descending, name breaking ties. With
    estimates (category -> low/med/high): score = percent / effort weight
    (low 1, med 2, high 3; unlisted categories count as med), highest
    score first.
    """
    if report.empty:
        raise TriageError("cannot rank categories of an empty report")
    if effort_estimates is None:
        scored = [(pct, name) for name, _, pct in report.rows]
    else:
        for cat, effort in effort_estimates.items():
            if effort not in EFFORT_WEIGHTS:
                raise TriageError(
                    f"effort for {cat!r} must be one of {sorted(EFFORT_WEIGHTS)}, "
                    f"got {effort!r}"
                )
        scored = [
            (pct / EFFORT_WEIGHTS[effort_estimates.get(name, "med")], name)
            for name, _, pct in report.rows
        ]
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [name for _, name in scored]


def render_category_report(report: CategoryReport) -> str:
    """Delimited text in (category, count, amount %) shape, one header line
    recording the denominator, coverage, and source split."""
    lines = [
        f"# errors: {report.total_errors}\treviewed: {report.reviewed}"
        + (f"\tsource_split: {report.source_split}" if report.source_split else ""),
        "category\tcount\tamount_pct",
    ]
    for name, count, pct in report.rows:
        lines.append(f"{name}\t{count}\t{pct:.1f}")
    return "\n".join(lines) + "\n"


def save_store(directory, store: TriageStore) -> Path:
    """Persist a store as cases.json plus an append-only assignments.jsonl."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    cases_payload = {
        "version": STORE_VERSION,
        "source_split": store.source_split,
        "categories": store.categories,
        "media_paths": store.media_paths,
        "class_names": list(store.class_names),
        "cases": [
            {
                "video_id": c.video_id,
                "true_label": c.true_label,
                "predicted_label": c.predicted_label,
                "score_vector": list(c.score_vector),
            }
            for c in (store.case(v) for v in store.case_ids())
        ],
    }
    (directory / "cases.json").write_text(
        json.dumps(cases_payload, indent=2), encoding="utf-8")
    with (directory / "assignments.jsonl").open("w", encoding="utf-8") as fh:
        for a in store.log:
            fh.write(json.dumps({
                "video_id": a.video_id, "categories": list(a.categories),
                "comment": a.comment, "reviewer": a.reviewer,
                "timestamp": a.timestamp,
            }) + "\n")
    return directory


def append_assignment(directory, assignment: CategoryAssignment) -> None:
    """Append one log entry to an existing on-disk store."""
    with (Path(directory) / "assignments.jsonl").open("a", encoding="utf-8") as fh:
        fh.write(json.dumps({
            "video_id": assignment.video_id,
            "categories": list(assignment.categories),
            "comment": assignment.comment, "reviewer": assignment.reviewer,
            "timestamp": assignment.timestamp,
        }) + "\n")


def load_store(directory) -> TriageStore:
    """Rebuild a store by replaying its assignment log; the derived report
    is therefore always consistent with the raw log."""
    directory = Path(directory)
    cases_file = directory / "cases.json"
    if not cases_file.exists():
        raise TriageError(f"no triage store at {directory}")
    payload = json.loads(cases_file.read_text(encoding="utf-8"))
    if payload.get("version") != STORE_VERSION:
        raise TriageError(f"unsupported store version {payload.get('version')!r}")
    cases = [
        ErrorCase(c["video_id"], c["true_label"], c["predicted_label"],
                  tuple(c["score_vector"]))
        for c in payload["cases"]
    ]
    store = TriageStore(cases, source_split=payload.get("source_split", ""),
                        categories=payload.get("categories", DEFAULT_CATEGORIES),
                        media_paths=payload.get("media_paths", {}),
                        class_names=payload.get("class_names", ()))
    log_file = directory / "assignments.jsonl"
    if log_file.exists():
        for line in log_file.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            store.assign(entry["video_id"], entry["categories"],
                         comment=entry.get("comment", ""),
                         reviewer=entry.get("reviewer", ""),
                         timestamp=entry["timestamp"])
    return store
