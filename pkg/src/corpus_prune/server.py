"""HTTP review service: browse clusters, read exemplars, record verdicts.

JSON API (all under /api):

    GET  /api/clusters                      cluster summaries
    GET  /api/clusters/{id}/exemplars?m=5   closest/farthest members
    GET  /api/docs/{doc_id}                 full document
    POST /api/clusters/{id}/decision        record a keep/drop verdict
    GET  /api/progress                      decided/undecided tallies

The decision log file is the single source of truth: reads re-derive the
current view from it, writes append through the log's serialized appender.
Invariant violations (e.g. drop without a reason) return 422. When a
static directory is given, the annotator UI is served from it at /.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

from fastapi import FastAPI, HTTPException, Query
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .clustering import Assignment
from .corpus_io import Document
from .errors import UnknownClusterError, ValidationError
from .review import (
    DEFAULT_EXCERPT_CHARS,
    DEFAULT_EXEMPLARS_PER_SIDE,
    ClusterDecision,
    DecisionLog,
    exemplars,
    review_progress,
)


class DecisionRequest(BaseModel):
    verdict: str
    reason: str
    annotator: str
    note: str | None = None


def create_app(
    assignments: Sequence[Assignment],
    docs: Mapping[str, Document],
    decision_log: DecisionLog,
    static_dir: str | Path | None = None,
    excerpt_chars: int = DEFAULT_EXCERPT_CHARS,
) -> FastAPI:
    app = FastAPI(title="corpus-prune review service")

    by_cluster: dict[int, list[Assignment]] = {}
    for a in assignments:
        by_cluster.setdefault(a.cluster_id, []).append(a)
    summaries = [
        {
            "cluster_id": cluster_id,
            "size": len(members),
            "mean_distance": sum(m.distance for m in members) / len(members),
        }
        for cluster_id, members in sorted(by_cluster.items())
    ]

    @app.get("/api/clusters")
    def list_clusters():
        view = decision_log.current()
        out = []
        for s in summaries:
            decision = view.get(s["cluster_id"])
            out.append(
                {
                    **s,
                    "decided": decision is not None,
                    "verdict": decision.verdict if decision else None,
                }
            )
        return out

    @app.get("/api/clusters/{cluster_id}/exemplars")
    def cluster_exemplars(
        cluster_id: int, m: int = Query(default=DEFAULT_EXEMPLARS_PER_SIDE, ge=1)
    ):
        try:
            result = exemplars(
                assignments, docs, cluster_id, m=m, excerpt_chars=excerpt_chars
            )
        except UnknownClusterError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return result.to_json_dict()

    @app.get("/api/docs/{doc_id}")
    def get_document(doc_id: str):
        doc = docs.get(doc_id)
        if doc is None:
            raise HTTPException(status_code=404, detail=f"unknown document {doc_id!r}")
        return {"id": doc.id, "text": doc.text, "subset": doc.subset, **doc.extra}

    @app.post("/api/clusters/{cluster_id}/decision")
    def post_decision(cluster_id: int, body: DecisionRequest):
        if cluster_id not in by_cluster:
            raise HTTPException(
                status_code=404, detail=f"unknown cluster id: {cluster_id}"
            )
        try:
            decision = ClusterDecision(
                cluster_id=cluster_id,
                verdict=body.verdict,
                reason=body.reason,
                annotator=body.annotator,
                note=body.note,
            )
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        decision_log.append(decision)
        return {
            "ok": True,
            "cluster_id": cluster_id,
            "verdict": decision.verdict,
            "timestamp": decision.timestamp.isoformat(),
        }

    @app.get("/api/progress")
    def progress():
        return review_progress(decision_log.current(), k=len(by_cluster)).to_json_dict()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def serve(
    assignments: Sequence[Assignment],
    docs: Mapping[str, Document],
    decision_log: DecisionLog,
    host: str = "127.0.0.1",
    port: int = 8000,
    static_dir: str | Path | None = None,
) -> None:
    import uvicorn

    app = create_app(assignments, docs, decision_log, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
