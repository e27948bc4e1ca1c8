"""Exception types shared across the pipeline.

Validation errors (bad arguments, violated invariants, malformed configs)
derive from ValidationError; everything else (I/O, remote failures, corrupt
files) derives from PipelineError directly. The CLI maps the two branches
to exit codes 2 and 1 respectively.
"""


class PipelineError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(PipelineError):
    """Invalid arguments, specs, or records; precondition violations."""


class ShardFormatError(PipelineError):
    """A shard file failed to parse. Carries path and 1-based line number."""

    def __init__(self, path, line_no, reason):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {reason}")


class DuplicateIdError(ValidationError):
    def __init__(self, doc_id):
        self.doc_id = doc_id
        super().__init__(f"duplicate document id: {doc_id!r}")


class ProviderError(PipelineError):
    """Embedding provider failure (after retries, where applicable)."""


class StoreFormatError(PipelineError):
    """Corrupt or truncated embedding-store file. Carries a byte offset."""

    def __init__(self, reason, offset=None):
        self.offset = offset
        msg = reason if offset is None else f"{reason} (at byte offset {offset})"
        super().__init__(msg)


class UnknownClusterError(ValidationError):
    def __init__(self, cluster_id):
        self.cluster_id = cluster_id
        super().__init__(f"unknown cluster id: {cluster_id}")
