"""Deterministic synthetic corpora and embeddings for pipeline validation.

A fixture is a sharded JSONL corpus with planted cluster structure plus a
precomputed-embedding file for the offline provider: each document gets a
raw (unnormalized) vector near one of ``n_clusters`` directions on the
sphere, keyed by the SHA-256 of its provider-truncated text. Everything is
seeded, so regenerating a fixture reproduces it byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus_io import Document, ShardManifest, write_shards
from .embedding import DEFAULT_MAX_INPUT_CHARS, PrecomputedEmbeddingProvider

_SHARED_WORDS = ("the", "a", "of", "to", "and", "in", "is", "for", "on", "with")


@dataclass(frozen=True)
class FixturePaths:
    root: Path
    manifest_path: Path
    embeddings_path: Path
    manifest: ShardManifest
    labels: list[int]


def blob_points(
    n_points: int,
    n_blobs: int,
    dim: int,
    seed: int,
    spread: float = 0.05,
    antipodal: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Unit-norm points around well-separated directions, plus blob labels.

    With ``antipodal`` and n_blobs=2 the two directions are exact opposites.
    """
    rng = np.random.default_rng(seed)
    if antipodal:
        if n_blobs != 2:
            raise ValueError("antipodal layout requires exactly 2 blobs")
        first = rng.normal(size=dim)
        first /= np.linalg.norm(first)
        directions = np.stack([first, -first])
    else:
        directions = _separated_directions(rng, n_blobs, dim)
    labels = rng.integers(n_blobs, size=n_points)
    points = directions[labels] + spread * rng.normal(size=(n_points, dim))
    points /= np.linalg.norm(points, axis=1, keepdims=True)
    return points.astype(np.float32), labels


def _separated_directions(rng, n: int, dim: int, min_distance: float = 0.5):
    """Rejection-sample unit directions pairwise at least min_distance apart
    in cosine distance."""
    directions: list[np.ndarray] = []
    attempts = 0
    while len(directions) < n:
        attempts += 1
        if attempts > 10_000 * n:
            raise ValueError(
                f"cannot place {n} directions {min_distance} apart in dim {dim}"
            )
        candidate = rng.normal(size=dim)
        candidate /= np.linalg.norm(candidate)
        if directions and min(1.0 - float(candidate @ d) for d in directions) < min_distance:
            continue
        directions.append(candidate)
    return np.stack(directions)


def make_documents(
    n_docs: int,
    n_clusters: int,
    seed: int,
    min_words: int = 20,
    max_words: int = 200,
) -> tuple[list[Document], list[int]]:
    """Synthetic documents with per-cluster vocabularies and subset labels."""
    rng = np.random.default_rng(seed)
    cluster_vocab = [
        [f"w{c:02d}x{j:02d}" for j in range(40)] for c in range(n_clusters)
    ]
    docs: list[Document] = []
    labels: list[int] = []
    for i in range(n_docs):
        c = int(rng.integers(n_clusters))
        n_words = int(rng.integers(min_words, max_words + 1))
        own = rng.choice(cluster_vocab[c], size=n_words)
        shared = rng.choice(_SHARED_WORDS, size=max(1, n_words // 4))
        words = np.concatenate([own, shared])
        rng.shuffle(words)
        docs.append(
            Document(
                id=f"doc-{i:06d}",
                text=" ".join(words),
                subset=f"src{c % 4}",
            )
        )
        labels.append(c)
    return docs, labels


def build_fixture(
    out_dir: str | Path,
    n_docs: int = 10_000,
    dim: int = 32,
    n_clusters: int = 10,
    seed: int = 7,
    shard_size: int = 2500,
    spread: float = 0.08,
    max_input_chars: int = DEFAULT_MAX_INPUT_CHARS,
) -> FixturePaths:
    """Write a sharded corpus plus its precomputed raw embeddings."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    docs, labels = make_documents(n_docs, n_clusters, seed=int(rng.integers(2**63)))
    manifest = write_shards(docs, out_dir, shard_size)

    directions = _separated_directions(rng, n_clusters, dim)
    scales = 1.0 + rng.uniform(-0.5, 2.0, size=n_docs)  # raw vectors, not unit
    raw = directions[labels] * scales[:, None] + spread * rng.normal(
        size=(n_docs, dim)
    )
    keys = np.asarray(
        [
            PrecomputedEmbeddingProvider.text_key(doc.text[:max_input_chars])
            for doc in docs
        ]
    )
    embeddings_path = out_dir / "embeddings.npz"
    np.savez(embeddings_path, keys=keys, vectors=raw.astype(np.float32))

    return FixturePaths(
        root=out_dir,
        manifest_path=out_dir / "manifest.json",
        embeddings_path=embeddings_path,
        manifest=manifest,
        labels=labels,
    )
