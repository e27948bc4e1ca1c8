"""Apply cluster verdicts, subsample, split, export, and corpus statistics.

Within-cluster random subsampling allocates per-cluster quotas
proportionally to cluster sizes with largest-remainder rounding, then
samples uniformly without replacement inside each cluster. The rejected
alternative of keeping only the l members closest to each centroid is
available as a comparison mode.

"Vocab size" here means the number of unique whitespace-delimited tokens
(str.split()); other definitions (e.g. a tokenizer's vocabulary) differ.
Document lengths are counted in whitespace tokens, and the median is the
lower median for even counts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import FORMAT_VERSIONS
from .clustering import Assignment
from .corpus_io import (
    Document,
    ShardManifest,
    SplitSpec,
    read_documents,
    split_dataset,
    write_shards,
)
from .errors import PipelineError, ValidationError
from .review import VERDICT_KEEP, ClusterDecision
from .rng import Xoshiro256StarStar

MODE_RANDOM = "random_within_cluster"
MODE_TOP_L = "top_l_closest"
MODES = (MODE_RANDOM, MODE_TOP_L)

DEFAULT_SHARD_SIZE = 100_000


@dataclass(frozen=True)
class FilterPlan:
    mode: str
    target_total: int
    seed: int
    l: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.target_total < 1:
            raise ValidationError("target_total must be >= 1")
        if self.mode == MODE_TOP_L and (self.l is None or self.l < 1):
            raise ValidationError("top_l_closest mode requires l >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "target_total": self.target_total,
            "l": self.l,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class CorpusStats:
    doc_count: int
    vocab_size: int
    median_doc_len: int
    max_doc_len: int
    uncompressed_bytes: int
    per_subset_counts: dict[str, int]

    def to_json_dict(self) -> dict:
        return dict(vars(self))


def apply_decisions(
    assignments: Sequence[Assignment],
    decisions: Mapping[int, ClusterDecision],
    strict: bool = True,
) -> list[Assignment]:
    """Keep exactly the assignments whose cluster verdict is keep.

    In strict mode every cluster present in the assignments must have a
    decision; in lenient mode undecided clusters default to keep. Relative
    order is preserved.
    """
    clusters = {a.cluster_id for a in assignments}
    undecided = sorted(c for c in clusters if c not in decisions)
    if undecided and strict:
        raise ValidationError(
            f"{len(undecided)} clusters have no decision: {undecided}"
        )
    kept_clusters = {
        c
        for c in clusters
        if (c in decisions and decisions[c].verdict == VERDICT_KEEP)
        or (c not in decisions and not strict)
    }
    return [a for a in assignments if a.cluster_id in kept_clusters]


def allocate_quotas(sizes: Mapping[int, int], target_total: int) -> dict[int, int]:
    """Largest-remainder apportionment of ``target_total`` over clusters.

    Exact integer arithmetic: quota floor is (target * size) // total and
    leftover seats go to the largest remainders; ties break by larger
    cluster size, then lower cluster id. Quotas sum exactly to the target,
    and any infeasible quota (> cluster size) cascades its overflow to the
    largest clusters with remaining capacity.
    """
    if target_total < 0:
        raise ValidationError("target_total must be non-negative")
    total = sum(sizes.values())
    if any(s < 0 for s in sizes.values()):
        raise ValidationError("cluster sizes must be non-negative")
    if target_total > total:
        raise ValidationError(
            f"target_total {target_total} exceeds available {total} "
            f"(short by {target_total - total})"
        )
    if target_total == 0:
        return {c: 0 for c in sizes}

    quotas: dict[int, int] = {}
    remainders: list[tuple[int, int, int]] = []
    assigned = 0
    for cluster_id, size in sizes.items():
        floor = (target_total * size) // total
        quotas[cluster_id] = floor
        assigned += floor
        remainders.append(((target_total * size) % total, size, cluster_id))

    leftover = target_total - assigned
    remainders.sort(key=lambda t: (-t[0], -t[1], t[2]))
    for _, _, cluster_id in remainders[:leftover]:
        quotas[cluster_id] += 1

    # Proportional floors never exceed sizes when target <= total, but keep
    # the cascade so a violated assumption redistributes instead of failing.
    overflow = 0
    for cluster_id, size in sizes.items():
        if quotas[cluster_id] > size:
            overflow += quotas[cluster_id] - size
            quotas[cluster_id] = size
    if overflow:
        capacity_order = sorted(sizes, key=lambda c: (-sizes[c], c))
        for cluster_id in capacity_order:
            if overflow == 0:
                break
            room = sizes[cluster_id] - quotas[cluster_id]
            take = min(room, overflow)
            quotas[cluster_id] += take
            overflow -= take
    return quotas


def subsample(kept: Sequence[Assignment], plan: FilterPlan) -> list[str]:
    """Select document ids per the plan. Output follows input order.

    random_within_cluster: proportional quotas, then seeded uniform
    sampling without replacement inside each cluster. top_l_closest: the
    min(l, size) lowest-distance members per cluster, ignoring the target.
    """
    by_cluster: dict[int, list[int]] = {}
    for pos, a in enumerate(kept):
        by_cluster.setdefault(a.cluster_id, []).append(pos)

    selected_positions: list[int] = []
    if plan.mode == MODE_RANDOM:
        sizes = {c: len(ps) for c, ps in by_cluster.items()}
        quotas = allocate_quotas(sizes, plan.target_total)
        rng = Xoshiro256StarStar(plan.seed)
        for cluster_id in sorted(by_cluster):
            positions = by_cluster[cluster_id]
            selected_positions.extend(rng.sample(positions, quotas[cluster_id]))
    else:
        for cluster_id in sorted(by_cluster):
            positions = by_cluster[cluster_id]
            ranked = sorted(positions, key=lambda p: (kept[p].distance, p))
            selected_positions.extend(ranked[: plan.l])

    selected_positions.sort()
    return [kept[p].doc_id for p in selected_positions]


def compute_stats(docs: Iterable[Document]) -> CorpusStats:
    """Single pass over a document stream.

    Memory is bounded except for the distinct-token set behind vocab_size
    and one integer per document for the length distribution.
    """
    vocab: set[str] = set()
    lengths: list[int] = []
    total_bytes = 0
    per_subset: dict[str, int] = {}
    for doc in docs:
        tokens = doc.text.split()
        vocab.update(tokens)
        lengths.append(len(tokens))
        total_bytes += doc.byte_len
        label = doc.subset if doc.subset is not None else ""
        per_subset[label] = per_subset.get(label, 0) + 1

    lengths.sort()
    n = len(lengths)
    return CorpusStats(
        doc_count=n,
        vocab_size=len(vocab),
        median_doc_len=lengths[(n - 1) // 2] if n else 0,
        max_doc_len=lengths[-1] if n else 0,
        uncompressed_bytes=total_bytes,
        per_subset_counts=dict(sorted(per_subset.items())),
    )


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class ExportResult:
    manifests: dict[str, ShardManifest]
    stats: dict[str, CorpusStats]
    stats_path: Path
    provenance_path: Path


def export_dataset(
    selected_ids: Sequence[str],
    manifest: ShardManifest,
    split: SplitSpec,
    out_dir: str | Path,
    plan: FilterPlan | None = None,
    digest_paths: Mapping[str, str | Path | None] | None = None,
    shard_size: int = DEFAULT_SHARD_SIZE,
) -> ExportResult:
    """Split the selection, write one shard set per split, and report.

    Emits ``stats.json`` (per-split and overall corpus statistics) and
    ``provenance.json`` (seeds, plan, split spec, SHA-256 digests of the
    inputs named in ``digest_paths``). Ids beyond the split counts are
    discarded by the split. Raises when a selected id is missing from the
    corpus.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    train, val, test = split_dataset(list(selected_ids), split)
    wanted = set(train) | set(val) | set(test)
    docs: dict[str, Document] = {}
    for doc in read_documents(manifest):
        if doc.id in wanted:
            docs[doc.id] = doc
    missing = wanted - docs.keys()
    if missing:
        raise PipelineError(
            f"selected id {sorted(missing)[0]!r} not found in the corpus "
            f"({len(missing)} missing in total)"
        )

    manifests: dict[str, ShardManifest] = {}
    stats: dict[str, CorpusStats] = {}
    split_ids = {"train": train, "val": val, "test": test}
    for name, ids in split_ids.items():
        split_docs = [docs[i] for i in ids]
        manifests[name] = write_shards(split_docs, out_dir / name, shard_size)
        stats[name] = compute_stats(split_docs)
    stats["overall"] = compute_stats(
        docs[i] for ids in split_ids.values() for i in ids
    )

    stats_path = out_dir / "stats.json"
    stats_obj = {name: s.to_json_dict() for name, s in stats.items()}
    stats_obj["format_version"] = FORMAT_VERSIONS["stats_report"]
    stats_path.write_text(
        json.dumps(stats_obj, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    digests = {}
    for name, p in (digest_paths or {}).items():
        digests[name] = sha256_file(p) if p is not None else None
    provenance = {
        "format_version": FORMAT_VERSIONS["provenance"],
        "plan": plan.to_json_dict() if plan is not None else None,
        "split": {
            "train_count": split.train_count,
            "val_count": split.val_count,
            "test_count": split.test_count,
            "seed": split.seed,
        },
        "seeds": {
            "subsample": plan.seed if plan is not None else None,
            "split": split.seed,
        },
        "digests": digests,
        "selected_total": len(selected_ids),
    }
    provenance_path = out_dir / "provenance.json"
    provenance_path.write_text(
        json.dumps(provenance, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return ExportResult(
        manifests=manifests,
        stats=stats,
        stats_path=stats_path,
        provenance_path=provenance_path,
    )
