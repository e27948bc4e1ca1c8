"""Corpus pruning toolkit.

Embeds a document corpus, clusters the embedding space with mini-batch
spherical k-means, lets a human annotator drop low-quality clusters by
reviewing per-cluster exemplars, and exports a subsampled, split,
statistically documented dataset.
"""

__version__ = "0.1.0"

# Versions of the on-disk file formats this package reads and writes.
FORMAT_VERSIONS = {
    "shard_manifest": 1,
    "embedding_store": 1,
    "centroids": 1,
    "assignments": 1,
    "decision_log": 1,
    "stats_report": 1,
    "provenance": 1,
}
