"""HTTP service for the review workflow.

Endpoints:
  GET  /meta                          store shape: counts, classes, split
  GET  /cases?status=&true_class=     triage queue (review order preserved)
  GET  /cases/{id}                    one case + media URL + current view
  GET  /cases/{id}/history            full assignment history, oldest first
  POST /cases/{id}/assignments        submit categories/comment/reviewer
  GET  /categories                    palette (seeded + registered)
  POST /categories                    register a category without assigning
  GET  /report                        live category report
  GET  /confusion                     confusion matrix of the evaluated run
  GET  /media/{id}                    clip bytes, Range requests honored

Concurrent reviewers are serialized by a store-wide lock; conflicting
submissions to one case resolve last-write-wins by timestamp while the
history keeps every entry.
"""

from __future__ import annotations

import mimetypes
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .metrics import ConfusionMatrix, per_class_accuracy
from .triage import (
    CaseNotFound,
    CategoryAssignment,
    ErrorCase,
    TriageError,
    TriageStore,
    append_assignment,
    rank_categories,
    save_store,
)

__all__ = ["create_app", "serve_triage_api"]


class AssignmentIn(BaseModel):
    categories: list[str] = Field(min_length=1)
    comment: str = ""
    reviewer: str = ""


class CategoryIn(BaseModel):
    name: str = Field(min_length=1)


def _case_json(case: ErrorCase, store: TriageStore) -> dict:
    current = store.current_assignment(case.video_id)
    return {
        "video_id": case.video_id,
        "true_label": case.true_label,
        "predicted_label": case.predicted_label,
        "score_vector": list(case.score_vector),
        "review_status": case.review_status,
        "wrong_confidence": case.wrong_confidence,
        "media_url": f"/media/{case.video_id}",
        "current": _assignment_json(current) if current else None,
        "history_length": len(store.history(case.video_id)),
    }


def _assignment_json(a: CategoryAssignment) -> dict:
    return {
        "video_id": a.video_id,
        "categories": list(a.categories),
        "comment": a.comment,
        "reviewer": a.reviewer,
        "timestamp": a.timestamp,
    }


def _parse_range(header: str | None, size: int):
    """First byte range of a Range header as an inclusive (start, end), None
    when absent/malformed, or "unsatisfiable"."""
    if not header or not header.startswith("bytes="):
        return None
    spec = header[len("bytes="):].split(",")[0].strip()
    first, dash, last = spec.partition("-")
    if not dash:
        return None
    try:
        if first == "" and last:
            start = max(size - int(last), 0)
            end = size - 1
        elif first != "":
            start = int(first)
            end = int(last) if last else size - 1
        else:
            return None
    except ValueError:
        return None
    if start >= size or end < start:
        return "unsatisfiable"
    return start, min(end, size - 1)


def create_app(store: TriageStore, confusion: ConfusionMatrix | None = None,
               persist_dir=None) -> FastAPI:
    app = FastAPI(title="shotclass triage service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    app.state.store = store
    lock = threading.Lock()
    persist_dir = Path(persist_dir) if persist_dir is not None else None
    if persist_dir is not None:
        save_store(persist_dir, store)

    @app.exception_handler(CaseNotFound)
    async def _not_found(request: Request, exc: CaseNotFound):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(TriageError)
    async def _bad_input(request: Request, exc: TriageError):
        return JSONResponse(
            status_code=422,
            content={"detail": [{"loc": ["body"], "msg": str(exc),
                                 "type": "value_error"}]},
        )

    @app.get("/meta")
    def meta():
        return {
            "total_errors": len(store),
            "class_names": list(store.class_names),
            "source_split": store.source_split,
            "categories": list(store.categories),
        }

    @app.get("/cases")
    def list_cases(status: str | None = None, true_class: str | None = None):
        cases = store.cases(status=status, true_class=true_class)
        return [_case_json(c, store) for c in cases]

    @app.get("/cases/{video_id}")
    def get_case(video_id: str):
        return _case_json(store.case(video_id), store)

    @app.get("/cases/{video_id}/history")
    def get_history(video_id: str):
        return [_assignment_json(a) for a in store.history(video_id)]

    @app.post("/cases/{video_id}/assignments", status_code=201)
    def post_assignment(video_id: str, body: AssignmentIn):
        with lock:
            case = store.assign(video_id, body.categories,
                                comment=body.comment, reviewer=body.reviewer)
            if persist_dir is not None:
                append_assignment(persist_dir, store.history(video_id)[-1])
                _persist_meta(persist_dir, store)
        return _case_json(case, store)

    @app.get("/categories")
    def list_categories():
        return {"categories": list(store.categories)}

    @app.post("/categories", status_code=201)
    def add_category(body: CategoryIn):
        with lock:
            store.register_category(body.name)
            if persist_dir is not None:
                _persist_meta(persist_dir, store)
        return {"categories": list(store.categories)}

    @app.get("/report")
    def get_report():
        report = store.report()
        return {
            "total_errors": report.total_errors,
            "reviewed": report.reviewed,
            "unreviewed": report.unreviewed,
            "source_split": report.source_split,
            "rows": [
                {"category": name, "count": count, "percent": pct}
                for name, count, pct in report.rows
            ],
            "ranked": rank_categories(report) if not report.empty else [],
        }

    @app.get("/confusion")
    def get_confusion():
        if confusion is None:
            raise HTTPException(status_code=404, detail="no confusion matrix loaded")
        return {
            "class_names": list(confusion.class_names),
            "counts": [list(row) for row in confusion.counts],
            "per_class_accuracy": per_class_accuracy(confusion),
        }

    @app.get("/media/{video_id}")
    def get_media(video_id: str, request: Request):
        path = store.media_paths.get(video_id)
        if path is None or not Path(path).exists():
            raise HTTPException(status_code=404, detail=f"no media for {video_id!r}")
        data = Path(path).read_bytes()
        ctype = mimetypes.guess_type(path)[0] or "application/octet-stream"
        headers = {"Accept-Ranges": "bytes"}
        rng = _parse_range(request.headers.get("range"), len(data))
        if rng == "unsatisfiable":
            return Response(status_code=416,
                            headers={"Content-Range": f"bytes */{len(data)}"})
        if rng is None:
            return Response(content=data, media_type=ctype, headers=headers)
        start, end = rng
        headers["Content-Range"] = f"bytes {start}-{end}/{len(data)}"
        return Response(content=data[start:end + 1], status_code=206,
                        media_type=ctype, headers=headers)

    return app


def _persist_meta(persist_dir: Path, store: TriageStore) -> None:
    # cases.json holds the palette; rewrite it so registered categories survive
    save_store(persist_dir, store)


def serve_triage_api(store: TriageStore, host: str = "127.0.0.1", port: int = 8765,
                     confusion: ConfusionMatrix | None = None, persist_dir=None) -> None:
    """Run the service until interrupted."""
    import uvicorn

    uvicorn.run(create_app(store, confusion=confusion, persist_dir=persist_dir),
                host=host, port=port, log_level="warning")
