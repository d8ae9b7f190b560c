"""Immutable value types describing the observable state of one repository.

Snapshots are plain frozen dataclasses so they can be shared across threads
and compared structurally. The canonical JSON form (sorted keys, commits
sorted by hash, refs sorted by name) is the exact document that travels on
the wire and is stored inside grade reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class RefKind(str, Enum):
    LOCAL_BRANCH = "localBranch"
    REMOTE_TRACKING = "remoteTracking"
    TAG = "tag"


class HeadMode(str, Enum):
    ATTACHED = "attached"
    DETACHED = "detached"
    UNBORN = "unborn"


@dataclass(frozen=True)
class CommitNode:
    hash: str
    parents: tuple[str, ...]
    message: str
    summary: str
    author: str
    timestamp: int

    def to_wire(self) -> dict:
        return {
            "hash": self.hash,
            "parents": list(self.parents),
            "message": self.message,
            "summary": self.summary,
            "author": self.author,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_wire(cls, d: dict) -> "CommitNode":
        return cls(
            hash=d["hash"],
            parents=tuple(d["parents"]),
            message=d["message"],
            summary=d["summary"],
            author=d["author"],
            timestamp=int(d["timestamp"]),
        )


@dataclass(frozen=True)
class RefEntry:
    name: str
    kind: RefKind
    target: str

    def to_wire(self) -> dict:
        return {"name": self.name, "kind": self.kind.value, "target": self.target}

    @classmethod
    def from_wire(cls, d: dict) -> "RefEntry":
        return cls(name=d["name"], kind=RefKind(d["kind"]), target=d["target"])


@dataclass(frozen=True)
class HeadState:
    mode: HeadMode
    # attached/unborn carry the branch ref name, detached carries the hash
    ref: Optional[str] = None
    commit: Optional[str] = None

    def to_wire(self) -> dict:
        d: dict = {"mode": self.mode.value}
        if self.ref is not None:
            d["ref"] = self.ref
        if self.commit is not None:
            d["commit"] = self.commit
        return d

    @classmethod
    def from_wire(cls, d: dict) -> "HeadState":
        return cls(mode=HeadMode(d["mode"]), ref=d.get("ref"), commit=d.get("commit"))


@dataclass(frozen=True)
class WorkingStatus:
    staged: tuple[str, ...] = ()
    modified: tuple[str, ...] = ()
    untracked: tuple[str, ...] = ()

    def to_wire(self) -> dict:
        return {
            "staged": list(self.staged),
            "modified": list(self.modified),
            "untracked": list(self.untracked),
        }

    @classmethod
    def from_wire(cls, d: dict) -> "WorkingStatus":
        return cls(
            staged=tuple(d["staged"]),
            modified=tuple(d["modified"]),
            untracked=tuple(d["untracked"]),
        )


@dataclass(frozen=True)
class RepoSnapshot:
    commits: tuple[CommitNode, ...]  # sorted by hash
    refs: tuple[RefEntry, ...]  # sorted by name
    head: HeadState
    status: WorkingStatus = field(default_factory=WorkingStatus)
    captured_at: float = 0.0

    def commit_hashes(self) -> frozenset[str]:
        return frozenset(c.hash for c in self.commits)

    def ref_map(self) -> dict[str, str]:
        return {r.name: r.target for r in self.refs}

    def commit_by_hash(self) -> dict[str, CommitNode]:
        return {c.hash: c for c in self.commits}

    def local_branches(self) -> dict[str, str]:
        """Short branch name -> tip hash, for refs/heads/* only."""
        out = {}
        for r in self.refs:
            if r.kind is RefKind.LOCAL_BRANCH:
                out[r.name[len("refs/heads/"):]] = r.target
        return out

    def reachable_from(self, tip: str) -> frozenset[str]:
        """Hashes of tip and all its ancestors within this snapshot."""
        by_hash = self.commit_by_hash()
        seen: set[str] = set()
        stack = [tip]
        while stack:
            h = stack.pop()
            if h in seen or h not in by_hash:
                continue
            seen.add(h)
            stack.extend(by_hash[h].parents)
        return frozenset(seen)

    def to_wire(self) -> dict:
        return {
            "commits": [c.to_wire() for c in sorted(self.commits, key=lambda c: c.hash)],
            "refs": [r.to_wire() for r in sorted(self.refs, key=lambda r: r.name)],
            "head": self.head.to_wire(),
            "status": self.status.to_wire(),
            "capturedAt": self.captured_at,
        }

    @classmethod
    def from_wire(cls, d: dict) -> "RepoSnapshot":
        return cls(
            commits=tuple(sorted((CommitNode.from_wire(c) for c in d["commits"]), key=lambda c: c.hash)),
            refs=tuple(sorted((RefEntry.from_wire(r) for r in d["refs"]), key=lambda r: r.name)),
            head=HeadState.from_wire(d["head"]),
            status=WorkingStatus.from_wire(d["status"]),
            captured_at=float(d["capturedAt"]),
        )

    def canonical_json(self) -> str:
        return json.dumps(self.to_wire(), sort_keys=True, separators=(",", ":"))


def make_snapshot(
    commits: list[CommitNode],
    refs: list[RefEntry],
    head: HeadState,
    status: WorkingStatus = WorkingStatus(),
    captured_at: float = 0.0,
) -> RepoSnapshot:
    """Normalize ordering so structurally equal states compare equal."""
    return RepoSnapshot(
        commits=tuple(sorted(commits, key=lambda c: c.hash)),
        refs=tuple(sorted(refs, key=lambda r: r.name)),
        head=head,
        status=status,
        captured_at=captured_at,
    )
