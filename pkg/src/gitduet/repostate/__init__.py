"""Structured views of git repositories: snapshots, deltas, equivalence."""

from .diff import RefChange, SnapshotDelta, apply_delta, diff_snapshots
from .equivalence import StateDigest, capture_state_digest, state_equivalent
from .extract import (
    MAX_COMMITS,
    ensure_repository,
    is_bare,
    is_repository,
    run_git,
    snapshot,
    tree_digest,
)
from .model import (
    CommitNode,
    HeadMode,
    HeadState,
    RefEntry,
    RefKind,
    RepoSnapshot,
    WorkingStatus,
    make_snapshot,
)

__all__ = [
    "CommitNode",
    "HeadMode",
    "HeadState",
    "MAX_COMMITS",
    "RefChange",
    "RefEntry",
    "RefKind",
    "RepoSnapshot",
    "SnapshotDelta",
    "StateDigest",
    "WorkingStatus",
    "apply_delta",
    "capture_state_digest",
    "diff_snapshots",
    "ensure_repository",
    "is_bare",
    "is_repository",
    "make_snapshot",
    "run_git",
    "snapshot",
    "state_equivalent",
    "tree_digest",
]
