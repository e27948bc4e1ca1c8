#!/usr/bin/env python3
"""Generate the synthetic 10k-document fixture used by the test suite and
the README walkthrough: a sharded JSONL corpus with planted cluster
structure plus precomputed raw embeddings for the offline provider."""

import argparse

from corpus_prune.synthetic import build_fixture


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="fixture", help="output directory")
    parser.add_argument("--n-docs", type=int, default=10_000)
    parser.add_argument("--dim", type=int, default=32)
    parser.add_argument("--n-clusters", type=int, default=10)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--shard-size", type=int, default=2500)
    args = parser.parse_args()

    paths = build_fixture(
        args.out,
        n_docs=args.n_docs,
        dim=args.dim,
        n_clusters=args.n_clusters,
        seed=args.seed,
        shard_size=args.shard_size,
    )
    print(f"manifest:   {paths.manifest_path}")
    print(f"embeddings: {paths.embeddings_path}")
    print(f"documents:  {paths.manifest.total_docs} in {len(paths.manifest.shard_paths)} shards")


if __name__ == "__main__":
    main()
