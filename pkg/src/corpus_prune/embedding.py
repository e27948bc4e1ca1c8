"""Embedding acquisition, unit-norm normalization, and binary persistence.

The embedding model itself is externalized behind a provider interface; two
implementations ship here: an HTTP client (POST /embed) and a file-backed
provider over precomputed raw vectors for fully offline runs.

Store file layout (all integers little-endian):

    magic            4 bytes  b"EMBS"
    format_version   u32
    dim              u32
    count            u64
    id_checksum      u64      FNV-1a(64) over id bytes joined by 0x00
                              (separators between ids, none trailing)
    body             count * dim float32, row-major
    footer           per id: u32 byte length + UTF-8 bytes

load(save(s)) is bit-exact: rows are written and read back as raw float32.
"""

from __future__ import annotations

import hashlib
import logging
import struct
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import FORMAT_VERSIONS
from .corpus_io import Document
from .errors import ProviderError, StoreFormatError, ValidationError

logger = logging.getLogger(__name__)

MAGIC = b"EMBS"
ROW_NORM_TOL = 1e-4
DEFAULT_MAX_INPUT_CHARS = 2048

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_ids(ids: Sequence[str]) -> int:
    """FNV-1a (64-bit) over ids joined by single 0x00 separator bytes."""
    h = _FNV_OFFSET
    for i, doc_id in enumerate(ids):
        data = doc_id.encode("utf-8") if i == 0 else b"\x00" + doc_id.encode("utf-8")
        for byte in data:
            h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def normalize(v: np.ndarray) -> np.ndarray:
    """Project a vector onto the unit sphere: v / ||v||2.

    Zero or non-finite input cannot be placed on the sphere and raises.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError("normalize expects a non-empty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ValidationError("cannot normalize a vector with non-finite components")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValidationError("cannot normalize the zero vector")
    return v / norm


@dataclass(frozen=True)
class EmbeddingStore:
    """Unit-norm float32 rows aligned with an ordered document-id index."""

    rows: np.ndarray
    ids: tuple[str, ...]

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.dtype != np.float32:
            raise ValidationError("rows must be a 2-d float32 matrix")
        if len(self.ids) != self.rows.shape[0]:
            raise ValidationError(
                f"id index length {len(self.ids)} != row count {self.rows.shape[0]}"
            )
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("id index entries must be unique")
        if self.count:
            norms = np.linalg.norm(self.rows.astype(np.float64), axis=1)
            bad = np.nonzero(np.abs(norms - 1.0) > ROW_NORM_TOL)[0]
            if bad.size:
                raise ValidationError(
                    f"row {bad[0]} has norm {norms[bad[0]]:.6f}, outside 1 +/- {ROW_NORM_TOL}"
                )
        self.rows.flags.writeable = False

    @property
    def count(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


class EmbeddingProvider:
    """Interface: batch text-in, raw vectors out.

    Implementations expose ``dim``, ``max_input_chars``, and
    ``embed_batch``; returned vectors need not be normalized.
    """

    dim: int
    max_input_chars: int

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        raise NotImplementedError


class HttpEmbeddingProvider(EmbeddingProvider):
    """Client for a remote embedding endpoint.

    Protocol: POST {url}/embed with {"texts": [...]} returns
    {"embeddings": [[...], ...], "dim": N}. Any non-200 response is a
    retryable failure (retries are the caller's job, see embed_corpus).
    """

    def __init__(
        self,
        url: str,
        dim: int,
        max_input_chars: int = DEFAULT_MAX_INPUT_CHARS,
        timeout: float = 60.0,
    ):
        self.url = url.rstrip("/")
        self.dim = dim
        self.max_input_chars = max_input_chars
        self.timeout = timeout

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        import requests

        try:
            resp = requests.post(
                f"{self.url}/embed", json={"texts": texts}, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise ProviderError(f"embedding request failed: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderError(
                f"embedding endpoint returned HTTP {resp.status_code}"
            )
        payload = resp.json()
        received_dim = payload.get("dim")
        if received_dim != self.dim:
            raise ValidationError(
                f"dimension mismatch: expected {self.dim}, received {received_dim}"
            )
        return np.asarray(payload["embeddings"], dtype=np.float32)


class PrecomputedEmbeddingProvider(EmbeddingProvider):
    """Offline provider over precomputed raw vectors.

    The file is an ``.npz`` with two arrays: ``keys`` (SHA-256 hex digests
    of the exact UTF-8 text the provider will be asked to embed, i.e. the
    already-truncated text) and ``vectors`` (float32, one row per key).
    """

    def __init__(self, path: str | Path, max_input_chars: int = DEFAULT_MAX_INPUT_CHARS):
        with np.load(Path(path), allow_pickle=False) as data:
            keys = [str(k) for k in data["keys"]]
            vectors = np.asarray(data["vectors"], dtype=np.float32)
        if vectors.ndim != 2 or len(keys) != vectors.shape[0]:
            raise ValidationError(f"malformed precomputed embedding file: {path}")
        self._by_key = {k: i for i, k in enumerate(keys)}
        self._vectors = vectors
        self.dim = int(vectors.shape[1])
        self.max_input_chars = max_input_chars

    @staticmethod
    def text_key(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            key = self.text_key(text)
            row = self._by_key.get(key)
            if row is None:
                raise ProviderError(
                    f"no precomputed embedding for text with digest {key}"
                )
            out[i] = self._vectors[row]
        return out


def embed_corpus(
    docs: Iterable[Document],
    provider: EmbeddingProvider,
    batch_size: int,
    max_attempts: int = 3,
    backoff_base: float = 0.5,
) -> EmbeddingStore:
    """Embed a document stream, one normalized row per document, in order.

    Texts longer than provider.max_input_chars are truncated to that prefix.
    Each batch is retried up to ``max_attempts`` times with exponential
    backoff; a batch that still fails raises a ProviderError naming the
    batch's first document id.
    """
    if batch_size < 1:
        raise ValidationError(f"batch_size must be >= 1, got {batch_size}")

    chunks: list[np.ndarray] = []
    ids: list[str] = []
    batch: list[tuple[str, str]] = []

    def flush():
        if not batch:
            return
        texts = [text for _, text in batch]
        raw = _embed_with_retries(provider, texts, batch[0][0], max_attempts, backoff_base)
        if raw.shape != (len(texts), provider.dim):
            raise ValidationError(
                f"dimension mismatch: expected {(len(texts), provider.dim)}, "
                f"received {tuple(raw.shape)}"
            )
        normalized = np.empty_like(raw, dtype=np.float32)
        for i, row in enumerate(raw):
            try:
                normalized[i] = normalize(row).astype(np.float32)
            except ValidationError as exc:
                raise ProviderError(
                    f"unusable embedding for document {batch[i][0]!r}: {exc}"
                ) from exc
        chunks.append(normalized)
        ids.extend(doc_id for doc_id, _ in batch)
        batch.clear()

    for doc in docs:
        batch.append((doc.id, doc.text[: provider.max_input_chars]))
        if len(batch) >= batch_size:
            flush()
    flush()

    if chunks:
        rows = np.vstack(chunks)
    else:
        rows = np.empty((0, provider.dim), dtype=np.float32)
    return EmbeddingStore(rows=rows, ids=tuple(ids))


def _embed_with_retries(provider, texts, first_id, max_attempts, backoff_base):
    last_exc = None
    for attempt in range(max_attempts):
        try:
            return provider.embed_batch(texts)
        except ProviderError as exc:
            last_exc = exc
            if attempt + 1 < max_attempts:
                delay = backoff_base * (2**attempt)
                logger.warning(
                    "embedding batch starting at %r failed (attempt %d/%d): %s",
                    first_id,
                    attempt + 1,
                    max_attempts,
                    exc,
                )
                if delay > 0:
                    time.sleep(delay)
    raise ProviderError(
        f"embedding batch starting at document {first_id!r} failed "
        f"after {max_attempts} attempts: {last_exc}"
    )


def save_store(store: EmbeddingStore, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = struct.pack(
        "<4sIIQQ",
        MAGIC,
        FORMAT_VERSIONS["embedding_store"],
        store.dim,
        store.count,
        fnv1a_ids(store.ids),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(store.rows, dtype="<f4").tobytes())
        for doc_id in store.ids:
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)


def load_store(path: str | Path) -> EmbeddingStore:
    path = Path(path)
    if not path.exists():
        raise StoreFormatError(f"embedding store not found: {path}")
    data = path.read_bytes()
    header_size = struct.calcsize("<4sIIQQ")
    if len(data) < header_size:
        raise StoreFormatError("truncated header", offset=len(data))
    magic, version, dim, count, checksum = struct.unpack_from("<4sIIQQ", data, 0)
    if magic != MAGIC:
        raise StoreFormatError(f"bad magic {magic!r}", offset=0)
    if version != FORMAT_VERSIONS["embedding_store"]:
        raise StoreFormatError(f"unsupported format_version {version}", offset=4)

    body_size = count * dim * 4
    if len(data) < header_size + body_size:
        raise StoreFormatError("truncated row data", offset=len(data))
    rows = np.frombuffer(
        data, dtype="<f4", count=count * dim, offset=header_size
    ).reshape(count, dim)

    ids: list[str] = []
    offset = header_size + body_size
    for _ in range(count):
        if offset + 4 > len(data):
            raise StoreFormatError("truncated id index", offset=offset)
        (length,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if offset + length > len(data):
            raise StoreFormatError("truncated id entry", offset=offset)
        ids.append(data[offset : offset + length].decode("utf-8"))
        offset += length
    if offset != len(data):
        raise StoreFormatError("trailing bytes after id index", offset=offset)

    if len(ids) != count:
        raise StoreFormatError(
            f"id index has {len(ids)} entries, header says {count}"
        )
    if fnv1a_ids(ids) != checksum:
        raise StoreFormatError("id checksum mismatch (store corrupt or ids altered)")
    rows = rows.copy().astype(np.float32, copy=False)
    return EmbeddingStore(rows=rows, ids=tuple(ids))
