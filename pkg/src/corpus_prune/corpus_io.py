"""Streaming corpus ingestion, sharded export, and dataset splitting.

Document format is JSONL, UTF-8, one object per line:

    {"id": "<string>", "text": "<string>", "subset": "<optional string>"}

Unknown keys are preserved on round trip. Plain shards end in ``.jsonl``;
zstandard-compressed shards end in ``.jsonl.zst`` (requires the optional
``zstandard`` package). A shard set is described by ``manifest.json``:

    {"format_version": 1, "shards": [{"path": ..., "count": ...}]}

Shard paths inside the JSON file are relative to the manifest's directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

from . import FORMAT_VERSIONS
from .errors import DuplicateIdError, PipelineError, ShardFormatError, ValidationError
from .rng import Xoshiro256StarStar

_RESERVED_KEYS = ("id", "text", "subset")


@dataclass(frozen=True)
class Document:
    """One corpus record. ``extra`` carries unknown JSONL keys verbatim."""

    id: str
    text: str
    subset: str | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ValidationError("document id must be non-empty")

    @property
    def byte_len(self) -> int:
        return len(self.text.encode("utf-8"))

    def to_json_line(self) -> str:
        obj = {"id": self.id, "text": self.text}
        if self.subset is not None:
            obj["subset"] = self.subset
        for key in sorted(self.extra):
            obj[key] = self.extra[key]
        return json.dumps(obj, ensure_ascii=False)

    @classmethod
    def from_obj(cls, obj: dict[str, Any]) -> "Document":
        if not isinstance(obj, dict):
            raise ValueError(f"expected a JSON object, got {type(obj).__name__}")
        doc_id = obj.get("id")
        text = obj.get("text")
        if not isinstance(doc_id, str) or not doc_id:
            raise ValueError("missing or invalid 'id'")
        if not isinstance(text, str):
            raise ValueError("missing or invalid 'text'")
        subset = obj.get("subset")
        if subset is not None and not isinstance(subset, str):
            raise ValueError("'subset' must be a string when present")
        extra = {k: v for k, v in obj.items() if k not in _RESERVED_KEYS}
        return cls(id=doc_id, text=text, subset=subset, extra=extra)


@dataclass(frozen=True)
class ShardManifest:
    shard_paths: tuple[str, ...]
    doc_counts: tuple[int, ...]
    total_docs: int
    format_version: int = FORMAT_VERSIONS["shard_manifest"]

    def __post_init__(self):
        if len(self.shard_paths) != len(self.doc_counts):
            raise ValidationError("shard_paths and doc_counts length mismatch")
        if len(set(self.shard_paths)) != len(self.shard_paths):
            raise ValidationError("shard paths must be unique")
        if self.total_docs != sum(self.doc_counts):
            raise ValidationError(
                f"total_docs {self.total_docs} != sum of doc_counts {sum(self.doc_counts)}"
            )


@dataclass(frozen=True)
class SplitSpec:
    train_count: int
    val_count: int
    test_count: int
    seed: int

    def __post_init__(self):
        for name in ("train_count", "val_count", "test_count"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")

    @property
    def total(self) -> int:
        return self.train_count + self.val_count + self.test_count


def _open_shard_read(path: str):
    if path.endswith(".zst"):
        try:
            import zstandard
        except ImportError as exc:
            raise PipelineError(
                f"cannot read {path}: the 'zstandard' package is not installed"
            ) from exc
        fh = open(path, "rb")
        reader = zstandard.ZstdDecompressor().stream_reader(fh)
        import io

        return io.TextIOWrapper(reader, encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def _open_shard_write(path: str):
    if path.endswith(".zst"):
        try:
            import zstandard
        except ImportError as exc:
            raise PipelineError(
                f"cannot write {path}: the 'zstandard' package is not installed"
            ) from exc
        fh = open(path, "wb")
        writer = zstandard.ZstdCompressor().stream_writer(fh)
        import io

        return io.TextIOWrapper(writer, encoding="utf-8", newline="\n")
    return open(path, "w", encoding="utf-8", newline="\n")


def read_documents(manifest: ShardManifest) -> Iterator[Document]:
    """Stream documents in shard order, then within-shard line order.

    Raises ShardFormatError on malformed lines (with path and line number),
    DuplicateIdError when an id repeats anywhere in the manifest, and
    PipelineError when a shard file is missing.
    """
    seen: set[str] = set()
    for path in manifest.shard_paths:
        if not os.path.exists(path):
            raise PipelineError(f"shard file not found: {path}")
        with _open_shard_read(path) as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    doc = Document.from_obj(json.loads(line))
                except (json.JSONDecodeError, ValueError) as exc:
                    raise ShardFormatError(path, line_no, str(exc)) from exc
                if doc.id in seen:
                    raise DuplicateIdError(doc.id)
                seen.add(doc.id)
                yield doc


def write_shards(
    docs: Iterable[Document],
    out_dir: str | Path,
    shard_size: int,
    prefix: str = "shard",
    compression: str | None = None,
) -> ShardManifest:
    """Write documents in input order, ``shard_size`` per shard.

    Also writes ``manifest.json`` into ``out_dir``. Returns a manifest whose
    paths point at the written shard files.
    """
    if shard_size < 1:
        raise ValidationError(f"shard_size must be >= 1, got {shard_size}")
    if compression not in (None, "zst"):
        raise ValidationError(f"unsupported compression: {compression!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = ".jsonl.zst" if compression == "zst" else ".jsonl"

    paths: list[str] = []
    counts: list[int] = []
    fh = None
    try:
        for doc in docs:
            if fh is None or counts[-1] >= shard_size:
                if fh is not None:
                    fh.close()
                shard_path = str(out_dir / f"{prefix}_{len(paths):05d}{ext}")
                fh = _open_shard_write(shard_path)
                paths.append(shard_path)
                counts.append(0)
            fh.write(doc.to_json_line())
            fh.write("\n")
            counts[-1] += 1
    finally:
        if fh is not None:
            fh.close()

    manifest = ShardManifest(
        shard_paths=tuple(paths), doc_counts=tuple(counts), total_docs=sum(counts)
    )
    save_manifest(manifest, out_dir / "manifest.json")
    return manifest


def save_manifest(manifest: ShardManifest, path: str | Path) -> None:
    """Write manifest JSON; shard paths are stored relative to the file."""
    path = Path(path)
    base = path.parent
    shards = []
    for shard_path, count in zip(manifest.shard_paths, manifest.doc_counts):
        rel = os.path.relpath(shard_path, base)
        shards.append({"path": rel, "count": count})
    obj = {"format_version": manifest.format_version, "shards": shards}
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_manifest(path: str | Path) -> ShardManifest:
    """Read manifest JSON, resolving shard paths against its directory."""
    path = Path(path)
    if not path.exists():
        raise PipelineError(f"manifest file not found: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
        shards = obj["shards"]
        version = obj["format_version"]
        paths = tuple(str(path.parent / s["path"]) for s in shards)
        counts = tuple(int(s["count"]) for s in shards)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise PipelineError(f"malformed manifest {path}: {exc}") from exc
    return ShardManifest(
        shard_paths=paths,
        doc_counts=counts,
        total_docs=sum(counts),
        format_version=version,
    )


def index_documents(manifest: ShardManifest) -> dict[str, Document]:
    """Materialize a manifest into an id-keyed map. Holds the whole corpus
    in memory; meant for desk-scale corpora and the review service."""
    return {doc.id: doc for doc in read_documents(manifest)}


def split_dataset(
    doc_ids: list[str], spec: SplitSpec
) -> tuple[list[str], list[str], list[str]]:
    """Deterministically permute ids, then cut train/val/test in order.

    Ids beyond the three counts are discarded. Identical (ids, spec) inputs
    produce identical splits on any platform (see the rng module).
    """
    if len(set(doc_ids)) != len(doc_ids):
        raise ValidationError("doc_ids must be unique")
    if spec.total > len(doc_ids):
        raise ValidationError(
            f"split needs {spec.total} ids but only {len(doc_ids)} are available "
            f"(short by {spec.total - len(doc_ids)})"
        )
    permuted = list(doc_ids)
    Xoshiro256StarStar(spec.seed).shuffle(permuted)
    train = permuted[: spec.train_count]
    val = permuted[spec.train_count : spec.train_count + spec.val_count]
    test = permuted[spec.train_count + spec.val_count : spec.total]
    return train, val, test
