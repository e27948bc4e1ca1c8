"""Mini-batch k-means on the unit sphere with cosine distance.

Pipeline defaults mirror the intended production setting (k=220, batch
size 16384); both are overridable. The fit is:

1. k-means++ over a seeded uniform sample of the store;
2. ``total_steps`` mini-batch iterations: sample a batch without
   replacement, assign each point to its nearest centroid against the
   step-start snapshot, then apply sequential per-point updates
   counts[c] += 1; eta = 1/counts[c]; c <- normalize((1-eta)*c + eta*x);
3. after each step, any centroid whose count has not grown for
   ``stale_steps`` consecutive steps is re-seeded from the batch.

Distances are 1 - dot, computed with float64 accumulation over float32
inputs; assignments break ties toward the lowest cluster index. Identical
(store, k, batch_size, total_steps, seed) inputs are bit-reproducible on
one platform; across platforms distances agree within 1e-5.

Centroids file layout (integers little-endian):

    magic           4 bytes  b"CENT"
    header_len      u32
    header          JSON: format_version, k, dim, seed, steps_taken, counts
    body            k * dim float32, row-major
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from . import FORMAT_VERSIONS
from .embedding import EmbeddingStore
from .errors import PipelineError, StoreFormatError, ValidationError

logger = logging.getLogger(__name__)

CENTROIDS_MAGIC = b"CENT"
CENTROID_NORM_TOL = 1e-4
DEFAULT_K = 220
DEFAULT_BATCH_SIZE = 16384
DEFAULT_STALE_STEPS = 50


@dataclass(frozen=True)
class Centroids:
    """k unit-norm centroid vectors with per-centroid observation counts."""

    vectors: np.ndarray
    counts: np.ndarray
    seed: int
    steps_taken: int

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.dtype != np.float32:
            raise ValidationError("centroid vectors must be a 2-d float32 matrix")
        if self.counts.shape != (self.vectors.shape[0],):
            raise ValidationError("counts must have one entry per centroid")
        if np.any(self.counts < 1):
            raise ValidationError("every centroid count must be >= 1")
        norms = np.linalg.norm(self.vectors.astype(np.float64), axis=1)
        bad = np.nonzero(np.abs(norms - 1.0) > CENTROID_NORM_TOL)[0]
        if bad.size:
            raise ValidationError(
                f"centroid {bad[0]} has norm {norms[bad[0]]:.6f}, "
                f"outside 1 +/- {CENTROID_NORM_TOL}"
            )

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class Assignment:
    doc_id: str
    cluster_id: int
    distance: float


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - dot(a, b) for unit vectors, clamped to [0, 2]."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    for name, v in (("a", a), ("b", b)):
        norm = float(np.linalg.norm(v.astype(np.float64)))
        if abs(norm - 1.0) > CENTROID_NORM_TOL:
            raise ValidationError(f"input {name} is not unit-norm (norm {norm:.6f})")
    d = 1.0 - float(np.dot(a.astype(np.float64), b.astype(np.float64)))
    return min(max(d, 0.0), 2.0)


def _pairwise_cosine(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """(n, k) matrix of 1 - dot, float64 accumulation."""
    sims = points.astype(np.float64) @ centers.astype(np.float64).T
    return 1.0 - sims


def kmeanspp_init(sample: np.ndarray, k: int, seed: int) -> Centroids:
    """Pick k distinct sample rows by the k-means++ rule.

    First center uniform at random; each subsequent center is drawn with
    probability proportional to the squared cosine distance to its nearest
    already-chosen center (so rows equal to a chosen center have zero
    probability). Deterministic given seed.
    """
    sample = np.asarray(sample, dtype=np.float32)
    if sample.ndim != 2:
        raise ValidationError("sample must be a 2-d matrix")
    n = sample.shape[0]
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if n < k:
        raise ValidationError(f"need at least k={k} sample rows, got {n}")
    if np.unique(sample, axis=0).shape[0] < k:
        raise ValidationError(f"sample has fewer than k={k} distinct rows")

    rng = np.random.default_rng(seed)
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = _pairwise_cosine(sample, sample[chosen[0] : chosen[0] + 1])[:, 0] ** 2
    # Rows bitwise-equal to a chosen center get exactly zero weight; float
    # round-off alone would leave them a ~1e-8 residual.
    d2[np.all(sample == sample[chosen[0]], axis=1)] = 0.0
    for i in range(1, k):
        total = d2.sum()
        if total == 0.0:
            raise ValidationError(
                f"sample has fewer than k={k} distinct directions"
            )
        chosen[i] = rng.choice(n, p=d2 / total)
        d_new = _pairwise_cosine(sample, sample[chosen[i] : chosen[i] + 1])[:, 0] ** 2
        d_new[np.all(sample == sample[chosen[i]], axis=1)] = 0.0
        d2 = np.minimum(d2, d_new)

    vectors = sample[chosen].copy()
    return Centroids(
        vectors=vectors,
        counts=np.ones(k, dtype=np.int64),
        seed=seed,
        steps_taken=0,
    )


def minibatch_step(
    vectors: np.ndarray, counts: np.ndarray, batch: np.ndarray
) -> np.ndarray:
    """One mini-batch update. Mutates float64 ``vectors`` and ``counts``.

    Assignments are computed against the step-start snapshot; updates are
    then applied per point, sequentially, in batch order. Returns the batch
    labels.
    """
    distances = _pairwise_cosine(batch, vectors)
    labels = np.argmin(distances, axis=1)
    batch64 = batch.astype(np.float64)
    for j in range(batch.shape[0]):
        c = labels[j]
        counts[c] += 1
        eta = 1.0 / counts[c]
        v = (1.0 - eta) * vectors[c] + eta * batch64[j]
        vectors[c] = v / np.linalg.norm(v)
    return labels


def repair_empty_clusters(
    centroids: Centroids, batch: np.ndarray, stale: np.ndarray
) -> Centroids:
    """Re-seed stale centroids to far batch points; counts reset to 1.

    ``stale`` is a boolean mask over centroids. Stale centroids (ascending
    index) are re-seeded, in order, to the not-yet-used batch point whose
    distance to its own assigned centroid is largest, measured once against
    the incoming centroids. No-op when nothing is stale.
    """
    stale_idx = np.nonzero(stale)[0]
    if stale_idx.size == 0:
        return centroids

    distances = _pairwise_cosine(batch, centroids.vectors)
    assigned = distances[np.arange(batch.shape[0]), np.argmin(distances, axis=1)]
    order = np.argsort(-assigned, kind="stable")

    vectors = centroids.vectors.copy()
    counts = centroids.counts.copy()
    for rank, c in enumerate(stale_idx):
        if rank >= order.size:
            break
        point = batch[order[rank]].astype(np.float64)
        vectors[c] = (point / np.linalg.norm(point)).astype(np.float32)
        counts[c] = 1
        logger.warning("re-seeded stale centroid %d from batch point", c)
    return Centroids(
        vectors=vectors,
        counts=counts,
        seed=centroids.seed,
        steps_taken=centroids.steps_taken,
    )


def default_total_steps(n: int, batch_size: int) -> int:
    """About four passes over the data."""
    return max(1, math.ceil(4 * n / batch_size))


def minibatch_fit(
    store: EmbeddingStore,
    k: int,
    batch_size: int,
    total_steps: int | None = None,
    seed: int = 0,
    init_sample_size: int | None = None,
    stale_steps: int = DEFAULT_STALE_STEPS,
) -> Centroids:
    """Fit k spherical centroids to the store with mini-batch updates."""
    n = store.count
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValidationError(f"k={k} exceeds store size {n}")
    if batch_size < 1:
        raise ValidationError(f"batch_size must be >= 1, got {batch_size}")
    if batch_size > n:
        logger.warning("batch_size %d exceeds store size %d; clamping", batch_size, n)
        batch_size = n
    if total_steps is None:
        total_steps = default_total_steps(n, batch_size)

    rng = np.random.default_rng(seed)
    sample_size = min(n, init_sample_size if init_sample_size is not None else 100 * k)
    sample_idx = rng.choice(n, size=sample_size, replace=False)
    init_seed = int(rng.integers(2**63))
    init = kmeanspp_init(store.rows[sample_idx], k, seed=init_seed)

    vectors = init.vectors.astype(np.float64)
    counts = init.counts.copy()
    steps_since_update = np.zeros(k, dtype=np.int64)

    for _ in range(total_steps):
        batch_idx = rng.choice(n, size=batch_size, replace=False)
        labels = minibatch_step(vectors, counts, store.rows[batch_idx])

        updated = np.zeros(k, dtype=bool)
        updated[np.unique(labels)] = True
        steps_since_update[updated] = 0
        steps_since_update[~updated] += 1

        stale = steps_since_update >= stale_steps
        if stale.any():
            current = Centroids(
                vectors=_renormalized_f32(vectors),
                counts=counts.copy(),
                seed=seed,
                steps_taken=0,
            )
            repaired = repair_empty_clusters(current, store.rows[batch_idx], stale)
            vectors = repaired.vectors.astype(np.float64)
            counts = repaired.counts.copy()
            steps_since_update[stale] = 0

    return Centroids(
        vectors=_renormalized_f32(vectors),
        counts=counts,
        seed=seed,
        steps_taken=total_steps,
    )


def _renormalized_f32(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return (vectors / norms).astype(np.float32)


def assign_all(store: EmbeddingStore, centroids: Centroids) -> list[Assignment]:
    """Nearest-centroid assignment for every store row, in store order.

    Ties break toward the lowest cluster index. Raises on dim mismatch.
    """
    if store.dim != centroids.dim:
        raise ValidationError(
            f"dimension mismatch: store dim {store.dim} vs centroids dim {centroids.dim}"
        )
    out: list[Assignment] = []
    chunk = 8192
    for start in range(0, store.count, chunk):
        rows = store.rows[start : start + chunk]
        distances = _pairwise_cosine(rows, centroids.vectors)
        labels = np.argmin(distances, axis=1)
        dists = np.clip(distances[np.arange(rows.shape[0]), labels], 0.0, 2.0)
        for i in range(rows.shape[0]):
            out.append(
                Assignment(
                    doc_id=store.ids[start + i],
                    cluster_id=int(labels[i]),
                    distance=float(dists[i]),
                )
            )
    return out


def save_centroids(centroids: Centroids, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps(
        {
            "format_version": FORMAT_VERSIONS["centroids"],
            "k": centroids.k,
            "dim": centroids.dim,
            "seed": centroids.seed,
            "steps_taken": centroids.steps_taken,
            "counts": centroids.counts.tolist(),
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CENTROIDS_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(centroids.vectors, dtype="<f4").tobytes())


def load_centroids(path: str | Path) -> Centroids:
    path = Path(path)
    if not path.exists():
        raise StoreFormatError(f"centroids file not found: {path}")
    data = path.read_bytes()
    if len(data) < 8:
        raise StoreFormatError("truncated centroids header", offset=len(data))
    if data[:4] != CENTROIDS_MAGIC:
        raise StoreFormatError(f"bad magic {data[:4]!r}", offset=0)
    (header_len,) = struct.unpack_from("<I", data, 4)
    if len(data) < 8 + header_len:
        raise StoreFormatError("truncated centroids header", offset=len(data))
    try:
        header = json.loads(data[8 : 8 + header_len].decode("utf-8"))
        k, dim = header["k"], header["dim"]
        counts = np.asarray(header["counts"], dtype=np.int64)
        seed, steps_taken = header["seed"], header["steps_taken"]
    except (json.JSONDecodeError, KeyError, UnicodeDecodeError) as exc:
        raise StoreFormatError(f"malformed centroids header: {exc}") from exc
    body = data[8 + header_len :]
    if len(body) != k * dim * 4:
        raise StoreFormatError(
            f"centroid matrix has {len(body)} bytes, expected {k * dim * 4}",
            offset=8 + header_len,
        )
    vectors = np.frombuffer(body, dtype="<f4").reshape(k, dim).copy()
    return Centroids(vectors=vectors, counts=counts, seed=seed, steps_taken=steps_taken)


def save_assignments(assignments: Iterable[Assignment], path: str | Path) -> None:
    """JSONL, one record per document; distance printed with 6 decimals."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for a in assignments:
            fh.write(
                f'{{"id": {json.dumps(a.doc_id, ensure_ascii=False)}, '
                f'"cluster": {a.cluster_id}, "distance": {a.distance:.6f}}}\n'
            )


def load_assignments(path: str | Path) -> list[Assignment]:
    path = Path(path)
    if not path.exists():
        raise PipelineError(f"assignments file not found: {path}")
    out: list[Assignment] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append(
                    Assignment(
                        doc_id=obj["id"],
                        cluster_id=int(obj["cluster"]),
                        distance=float(obj["distance"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise PipelineError(f"{path}:{line_no}: malformed assignment: {exc}") from exc
    return out


def mean_assigned_distance(assignments: Iterable[Assignment]) -> float:
    """Mean distance of an assignment list (0.0 for empty input)."""
    total = 0.0
    count = 0
    for a in assignments:
        total += a.distance
        count += 1
    return total / count if count else 0.0
