"""Per-cluster exemplars and the human keep/drop decision log.

An annotator judges each cluster from its m closest and m most distant
members (m defaults to 5 per side). Verdicts are persisted to an
append-only JSONL log; the latest entry per cluster wins, history is
retained for audit.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .clustering import Assignment
from .corpus_io import Document
from .errors import PipelineError, UnknownClusterError, ValidationError

VERDICT_KEEP = "keep"
VERDICT_DROP = "drop"
VERDICTS = (VERDICT_KEEP, VERDICT_DROP)

REASON_NOT_APPLICABLE = "not_applicable"
DROP_REASONS = (
    "near_duplicates",
    "pornography",
    "navigation_bars",
    "product_specifications",
    "named_entity_lists",
    "other",
)
REASONS = DROP_REASONS + (REASON_NOT_APPLICABLE,)

DEFAULT_EXEMPLARS_PER_SIDE = 5
DEFAULT_EXCERPT_CHARS = 2000


@dataclass(frozen=True)
class Exemplar:
    doc_id: str
    distance: float
    excerpt: str


@dataclass(frozen=True)
class ExemplarSet:
    cluster_id: int
    size: int
    closest: tuple[Exemplar, ...]
    farthest: tuple[Exemplar, ...]

    def to_json_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "size": self.size,
            "closest": [vars(e) for e in self.closest],
            "farthest": [vars(e) for e in self.farthest],
        }


@dataclass(frozen=True)
class ClusterDecision:
    cluster_id: int
    verdict: str
    reason: str
    annotator: str
    note: str | None = None
    timestamp: datetime = field(
        default_factory=lambda: datetime.now(timezone.utc)
    )

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValidationError(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")
        if self.reason not in REASONS:
            raise ValidationError(f"unknown reason {self.reason!r}")
        if self.verdict == VERDICT_KEEP and self.reason != REASON_NOT_APPLICABLE:
            raise ValidationError("keep verdicts must carry reason 'not_applicable'")
        if self.verdict == VERDICT_DROP and self.reason == REASON_NOT_APPLICABLE:
            raise ValidationError("drop verdicts require a concrete reason")
        if self.timestamp.tzinfo is None:
            raise ValidationError("timestamp must be timezone-aware (UTC)")

    def to_json_line(self) -> str:
        obj = {
            "cluster_id": self.cluster_id,
            "verdict": self.verdict,
            "reason": self.reason,
            "annotator": self.annotator,
            "note": self.note,
            "timestamp": self.timestamp.isoformat(),
        }
        return json.dumps(obj, ensure_ascii=False)

    @classmethod
    def from_obj(cls, obj: dict) -> "ClusterDecision":
        try:
            return cls(
                cluster_id=int(obj["cluster_id"]),
                verdict=obj["verdict"],
                reason=obj["reason"],
                annotator=obj["annotator"],
                note=obj.get("note"),
                timestamp=datetime.fromisoformat(obj["timestamp"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed decision record: {exc}") from exc


def exemplars(
    assignments: Sequence[Assignment],
    docs: Mapping[str, Document],
    cluster_id: int,
    m: int = DEFAULT_EXEMPLARS_PER_SIDE,
    excerpt_chars: int = DEFAULT_EXCERPT_CHARS,
) -> ExemplarSet:
    """The m lowest- and m highest-distance members of a cluster.

    Clusters smaller than 2m yield fewer entries: closest fills first, the
    farthest list takes what remains, and no document appears twice.
    Excerpts are the first ``excerpt_chars`` characters of the text.
    """
    if m < 1:
        raise ValidationError(f"m must be >= 1, got {m}")
    members = [a for a in assignments if a.cluster_id == cluster_id]
    if not members:
        raise UnknownClusterError(cluster_id)
    members.sort(key=lambda a: a.distance)  # stable: input order breaks ties

    n_close = min(m, len(members))
    closest = members[:n_close]
    pool = members[n_close:]
    farthest = list(reversed(pool[-min(m, len(pool)) :])) if pool else []

    def to_exemplar(a: Assignment) -> Exemplar:
        doc = docs.get(a.doc_id)
        if doc is None:
            raise PipelineError(f"assignment references unknown document {a.doc_id!r}")
        return Exemplar(
            doc_id=a.doc_id,
            distance=a.distance,
            excerpt=doc.text[:excerpt_chars],
        )

    return ExemplarSet(
        cluster_id=cluster_id,
        size=len(members),
        closest=tuple(to_exemplar(a) for a in closest),
        farthest=tuple(to_exemplar(a) for a in farthest),
    )


class DecisionLog:
    """Append-only JSONL decision store.

    Appends are serialized through a lock; the current view is the latest
    entry per cluster in file order. Replaying the file reconstructs the
    view exactly.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, decision: ClusterDecision) -> None:
        line = decision.to_json_line()
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(line)
                fh.write("\n")
                fh.flush()

    def history(self) -> list[ClusterDecision]:
        if not self.path.exists():
            return []
        out = []
        with open(self.path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    out.append(ClusterDecision.from_obj(json.loads(line)))
                except (json.JSONDecodeError, ValidationError) as exc:
                    raise PipelineError(
                        f"{self.path}:{line_no}: bad decision record: {exc}"
                    ) from exc
        return out

    def current(self) -> dict[int, ClusterDecision]:
        view: dict[int, ClusterDecision] = {}
        for decision in self.history():
            view[decision.cluster_id] = decision
        return view


def record_decision(decision: ClusterDecision, store_path: str | Path) -> None:
    """Validate and append one decision to the log at ``store_path``."""
    DecisionLog(store_path).append(decision)


@dataclass(frozen=True)
class ReviewProgress:
    total_clusters: int
    decided: int
    undecided: int
    kept: int
    dropped: int
    drop_reasons: dict[str, int]

    def to_json_dict(self) -> dict:
        return dict(vars(self))


def review_progress(
    decisions: Mapping[int, ClusterDecision] | Iterable[ClusterDecision],
    k: int,
) -> ReviewProgress:
    """Counts of decided/undecided clusters and per-reason drop tallies.

    Accepts either a current-decision view or an iterable of decisions (in
    which case later entries supersede earlier ones).
    """
    if isinstance(decisions, Mapping):
        view = dict(decisions)
    else:
        view = {}
        for d in decisions:
            view[d.cluster_id] = d
    kept = sum(1 for d in view.values() if d.verdict == VERDICT_KEEP)
    dropped = sum(1 for d in view.values() if d.verdict == VERDICT_DROP)
    reasons: dict[str, int] = {}
    for d in view.values():
        if d.verdict == VERDICT_DROP:
            reasons[d.reason] = reasons.get(d.reason, 0) + 1
    return ReviewProgress(
        total_clusters=k,
        decided=len(view),
        undecided=max(0, k - len(view)),
        kept=kept,
        dropped=dropped,
        drop_reasons=dict(sorted(reasons.items())),
    )
