"""corpus-prune: single entry point for all pipeline stages.

Stages: embed, cluster, exemplars, serve-review, filter, stats. A TOML
config file (``--config``) may pre-set any per-stage parameter under a
table named after the stage; command-line flags win over config values.
The effective configuration and SHA-256 digests of the stage's input
files are logged before any work happens.

Exit codes: 0 success, 1 runtime failure, 2 invalid usage/validation.
With ``--log-json`` every log line (and the final error, if any) is a
machine-readable JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import FORMAT_VERSIONS, __version__
from . import clustering, corpus_io, embedding, filtering, review
from .errors import PipelineError, ValidationError

logger = logging.getLogger("corpus_prune")

_STAGE_DEFAULTS = {
    "embed": {"batch_size": 64, "max_input_chars": embedding.DEFAULT_MAX_INPUT_CHARS},
    "cluster": {
        "k": clustering.DEFAULT_K,
        "batch_size": clustering.DEFAULT_BATCH_SIZE,
        "seed": 0,
        "stale_steps": clustering.DEFAULT_STALE_STEPS,
    },
    "exemplars": {"m": review.DEFAULT_EXEMPLARS_PER_SIDE, "excerpt_chars": review.DEFAULT_EXCERPT_CHARS},
    "serve-review": {"host": "127.0.0.1", "port": 8000},
    "filter": {"mode": "random", "seed": 0, "shard_size": filtering.DEFAULT_SHARD_SIZE},
    "stats": {},
}


class _JsonFormatter(logging.Formatter):
    def format(self, record):
        obj = {
            "level": record.levelname.lower(),
            "logger": record.name,
            "message": record.getMessage(),
        }
        return json.dumps(obj, ensure_ascii=False)


def _setup_logging(log_json: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    if log_json:
        handler.setFormatter(_JsonFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        import tomllib
    except ImportError:
        import tomli as tomllib
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"config file not found: {p}")
    try:
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"malformed config {p}: {exc}") from exc


def _effective(args: argparse.Namespace, config: dict, stage: str) -> dict:
    """Merge builtin defaults, the stage's config table, and flags (flags win)."""
    merged = dict(_STAGE_DEFAULTS.get(stage, {}))
    merged.update(config.get(stage, {}))
    for key, value in vars(args).items():
        if key in ("command", "config", "log_json", "threads", "func"):
            continue
        if value is not None:
            merged[key] = value
    return merged


def _log_run(stage: str, params: dict, input_paths: dict) -> None:
    digests = {}
    for name, path in input_paths.items():
        if path is not None and Path(path).exists():
            digests[name] = filtering.sha256_file(path)
        else:
            digests[name] = None
    printable = {k: (str(v) if isinstance(v, Path) else v) for k, v in params.items()}
    logger.info(
        "running stage=%s config=%s input_digests=%s",
        stage,
        json.dumps(printable, sort_keys=True),
        json.dumps(digests, sort_keys=True),
    )


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise ValidationError(f"missing required parameter(s): {', '.join(missing)}")


def _cmd_embed(args, config) -> int:
    cfg = _effective(args, config, "embed")
    _require(cfg, "manifest", "out")
    if cfg.get("provider") is None and cfg.get("precomputed") is None:
        raise ValidationError("embed needs --provider URL or --precomputed PATH")
    if cfg.get("provider") is not None and cfg.get("precomputed") is not None:
        raise ValidationError("--provider and --precomputed are mutually exclusive")
    if cfg.get("provider") is not None and cfg.get("dim") is None:
        raise ValidationError("--dim is required with a remote --provider")
    _log_run("embed", cfg, {"manifest": cfg["manifest"], "precomputed": cfg.get("precomputed")})

    if cfg.get("precomputed") is not None:
        provider = embedding.PrecomputedEmbeddingProvider(
            cfg["precomputed"], max_input_chars=cfg["max_input_chars"]
        )
    else:
        provider = embedding.HttpEmbeddingProvider(
            cfg["provider"], dim=cfg["dim"], max_input_chars=cfg["max_input_chars"]
        )
    manifest = corpus_io.load_manifest(cfg["manifest"])
    store = embedding.embed_corpus(
        corpus_io.read_documents(manifest), provider, batch_size=cfg["batch_size"]
    )
    embedding.save_store(store, cfg["out"])
    logger.info("embedded %d documents (dim %d) -> %s", store.count, store.dim, cfg["out"])
    return 0


def _cmd_cluster(args, config) -> int:
    cfg = _effective(args, config, "cluster")
    _require(cfg, "store", "out_centroids", "out_assignments")
    _log_run("cluster", cfg, {"store": cfg["store"]})

    store = embedding.load_store(cfg["store"])
    centroids = clustering.minibatch_fit(
        store,
        k=cfg["k"],
        batch_size=cfg["batch_size"],
        total_steps=cfg.get("steps"),
        seed=cfg["seed"],
        init_sample_size=cfg.get("init_sample_size"),
        stale_steps=cfg["stale_steps"],
    )
    assignments = clustering.assign_all(store, centroids)
    clustering.save_centroids(centroids, cfg["out_centroids"])
    clustering.save_assignments(assignments, cfg["out_assignments"])
    logger.info(
        "fit %d centroids over %d rows in %d steps; mean assigned distance %.6f",
        centroids.k,
        store.count,
        centroids.steps_taken,
        clustering.mean_assigned_distance(assignments),
    )
    return 0


def _cmd_exemplars(args, config) -> int:
    cfg = _effective(args, config, "exemplars")
    _require(cfg, "assignments", "manifest")
    _log_run(
        "exemplars", cfg, {"assignments": cfg["assignments"], "manifest": cfg["manifest"]}
    )
    assignments = clustering.load_assignments(cfg["assignments"])
    docs = corpus_io.index_documents(corpus_io.load_manifest(cfg["manifest"]))
    cluster_ids = (
        [cfg["cluster"]]
        if cfg.get("cluster") is not None
        else sorted({a.cluster_id for a in assignments})
    )
    result = [
        review.exemplars(
            assignments, docs, cluster_id, m=cfg["m"], excerpt_chars=cfg["excerpt_chars"]
        ).to_json_dict()
        for cluster_id in cluster_ids
    ]
    payload = json.dumps(result, indent=2, ensure_ascii=False) + "\n"
    if cfg.get("out"):
        Path(cfg["out"]).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    return 0


def _cmd_serve_review(args, config) -> int:
    from . import server

    cfg = _effective(args, config, "serve-review")
    _require(cfg, "assignments", "manifest", "decisions")
    _log_run(
        "serve-review",
        cfg,
        {"assignments": cfg["assignments"], "manifest": cfg["manifest"]},
    )
    assignments = clustering.load_assignments(cfg["assignments"])
    docs = corpus_io.index_documents(corpus_io.load_manifest(cfg["manifest"]))
    log = review.DecisionLog(cfg["decisions"])
    server.serve(
        assignments,
        docs,
        log,
        host=cfg["host"],
        port=int(cfg["port"]),
        static_dir=cfg.get("frontend"),
    )
    return 0


def _parse_split(value: str, seed: int) -> corpus_io.SplitSpec:
    try:
        parts = [int(p) for p in value.split(",")]
        if len(parts) != 3:
            raise ValueError("expected three comma-separated counts")
    except ValueError as exc:
        raise ValidationError(f"bad --split {value!r}: {exc}") from exc
    return corpus_io.SplitSpec(
        train_count=parts[0], val_count=parts[1], test_count=parts[2], seed=seed
    )


def _cmd_filter(args, config) -> int:
    cfg = _effective(args, config, "filter")
    _require(cfg, "assignments", "decisions", "manifest", "split", "out")
    mode = {"random": filtering.MODE_RANDOM, "top-l": filtering.MODE_TOP_L}.get(
        cfg["mode"]
    )
    if mode is None:
        raise ValidationError(f"--mode must be random or top-l, got {cfg['mode']!r}")
    if mode == filtering.MODE_RANDOM:
        _require(cfg, "target")
    _log_run(
        "filter",
        cfg,
        {
            "assignments": cfg["assignments"],
            "decisions": cfg["decisions"],
            "manifest": cfg["manifest"],
            "centroids": cfg.get("centroids"),
        },
    )

    assignments = clustering.load_assignments(cfg["assignments"])
    decisions = review.DecisionLog(cfg["decisions"]).current()
    kept = filtering.apply_decisions(
        assignments, decisions, strict=not cfg.get("lenient", False)
    )
    plan = filtering.FilterPlan(
        mode=mode,
        target_total=cfg.get("target") or 1,
        l=cfg.get("l"),
        seed=cfg["seed"],
    )
    selected = filtering.subsample(kept, plan)
    split = _parse_split(cfg["split"], seed=cfg.get("split_seed", cfg["seed"]))
    manifest = corpus_io.load_manifest(cfg["manifest"])
    result = filtering.export_dataset(
        selected,
        manifest,
        split,
        cfg["out"],
        plan=plan,
        digest_paths={
            "decision_log": cfg["decisions"],
            "centroids": cfg.get("centroids"),
            "assignments": cfg["assignments"],
        },
        shard_size=cfg["shard_size"],
    )
    logger.info(
        "kept %d of %d assignments, selected %d, exported train/val/test = %d/%d/%d -> %s",
        len(kept),
        len(assignments),
        len(selected),
        result.manifests["train"].total_docs,
        result.manifests["val"].total_docs,
        result.manifests["test"].total_docs,
        cfg["out"],
    )
    return 0


def _cmd_stats(args, config) -> int:
    cfg = _effective(args, config, "stats")
    _require(cfg, "manifest")
    _log_run("stats", cfg, {"manifest": cfg["manifest"]})
    manifest = corpus_io.load_manifest(cfg["manifest"])
    stats = filtering.compute_stats(corpus_io.read_documents(manifest))
    payload = json.dumps(stats.to_json_dict(), indent=2, sort_keys=True) + "\n"
    if cfg.get("out"):
        Path(cfg["out"]).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    return 0


def _version_string() -> str:
    formats = " ".join(f"{name}={v}" for name, v in sorted(FORMAT_VERSIONS.items()))
    return f"corpus-prune {__version__} (file formats: {formats})"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corpus-prune",
        description="Prune a text corpus via embedding clustering and human review.",
    )
    parser.add_argument("--version", action="version", version=_version_string())
    parser.add_argument("--config", help="TOML config file; flags override it")
    parser.add_argument("--log-json", action="store_true", help="JSON-lines logging")
    parser.add_argument("--threads", type=int, help="cap BLAS/worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="embed a corpus into a vector store")
    p.add_argument("--manifest")
    p.add_argument("--provider", help="remote embedding endpoint URL")
    p.add_argument("--precomputed", help="precomputed raw-embedding .npz")
    p.add_argument("--dim", type=int, help="embedding dim (remote provider)")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--max-input-chars", type=int, dest="max_input_chars")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("cluster", help="fit spherical mini-batch k-means")
    p.add_argument("--store")
    p.add_argument("--k", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--init-sample-size", type=int, dest="init_sample_size")
    p.add_argument("--stale-steps", type=int, dest="stale_steps")
    p.add_argument("--out-centroids", dest="out_centroids")
    p.add_argument("--out-assignments", dest="out_assignments")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("exemplars", help="dump closest/farthest cluster members")
    p.add_argument("--assignments")
    p.add_argument("--manifest")
    p.add_argument("--cluster", type=int, help="single cluster id (default: all)")
    p.add_argument("-m", type=int, dest="m")
    p.add_argument("--excerpt-chars", type=int, dest="excerpt_chars")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_exemplars)

    p = sub.add_parser("serve-review", help="run the annotator review service")
    p.add_argument("--assignments")
    p.add_argument("--manifest")
    p.add_argument("--decisions")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--frontend", help="static UI directory to serve at /")
    p.set_defaults(func=_cmd_serve_review)

    p = sub.add_parser("filter", help="apply verdicts, subsample, split, export")
    p.add_argument("--assignments")
    p.add_argument("--decisions")
    p.add_argument("--manifest")
    p.add_argument("--centroids", help="centroids file, digested into provenance")
    p.add_argument("--mode", choices=["random", "top-l"])
    p.add_argument("--target", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--split", help="train,val,test counts, e.g. 1000000,500,10000")
    p.add_argument("--split-seed", type=int, dest="split_seed")
    p.add_argument("--lenient", action="store_true", default=None,
                   help="treat undecided clusters as keep")
    p.add_argument("--shard-size", type=int, dest="shard_size")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("stats", help="corpus statistics for a manifest")
    p.add_argument("--manifest")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.log_json)

    try:
        config = _load_config(args.config)
        if args.threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                return args.func(args, config)
        return args.func(args, config)
    except ValidationError as exc:
        _report_error(exc, args.log_json)
        return 2
    except (PipelineError, OSError) as exc:
        _report_error(exc, args.log_json)
        return 1


def _report_error(exc: Exception, log_json: bool) -> None:
    if log_json:
        sys.stderr.write(
            json.dumps(
                {"level": "error", "error": type(exc).__name__, "message": str(exc)}
            )
            + "\n"
        )
    else:
        sys.stderr.write(f"error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
