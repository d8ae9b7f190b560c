"""Incremental deltas between two repository snapshots."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .model import CommitNode, HeadState, RepoSnapshot, WorkingStatus, make_snapshot


@dataclass(frozen=True)
class RefChange:
    name: str
    old_target: Optional[str]  # None when the ref was created
    new_target: Optional[str]  # None when the ref was deleted

    def to_wire(self) -> dict:
        d: dict = {"name": self.name}
        if self.old_target is not None:
            d["oldTarget"] = self.old_target
        if self.new_target is not None:
            d["newTarget"] = self.new_target
        return d

    @classmethod
    def from_wire(cls, d: dict) -> "RefChange":
        return cls(name=d["name"], old_target=d.get("oldTarget"), new_target=d.get("newTarget"))


@dataclass(frozen=True)
class SnapshotDelta:
    added_commit_nodes: tuple[CommitNode, ...] = ()
    removed_commits: frozenset[str] = frozenset()
    changed_refs: tuple[RefChange, ...] = ()
    head_changed: bool = False
    status_changed: bool = False
    # replacement values so the delta alone can rebuild the new snapshot
    new_head: Optional[HeadState] = None
    new_status: Optional[WorkingStatus] = None
    new_captured_at: float = 0.0

    @property
    def added_commits(self) -> frozenset[str]:
        return frozenset(c.hash for c in self.added_commit_nodes)

    def is_empty(self) -> bool:
        return not (
            self.added_commit_nodes
            or self.removed_commits
            or self.changed_refs
            or self.head_changed
            or self.status_changed
        )

    def to_wire(self) -> dict:
        d: dict = {
            "addedCommits": [c.to_wire() for c in sorted(self.added_commit_nodes, key=lambda c: c.hash)],
            "removedCommits": sorted(self.removed_commits),
            "changedRefs": [c.to_wire() for c in sorted(self.changed_refs, key=lambda c: c.name)],
            "headChanged": self.head_changed,
            "statusChanged": self.status_changed,
            "newCapturedAt": self.new_captured_at,
        }
        if self.new_head is not None:
            d["newHead"] = self.new_head.to_wire()
        if self.new_status is not None:
            d["newStatus"] = self.new_status.to_wire()
        return d

    @classmethod
    def from_wire(cls, d: dict) -> "SnapshotDelta":
        return cls(
            added_commit_nodes=tuple(CommitNode.from_wire(c) for c in d["addedCommits"]),
            removed_commits=frozenset(d["removedCommits"]),
            changed_refs=tuple(RefChange.from_wire(c) for c in d["changedRefs"]),
            head_changed=bool(d["headChanged"]),
            status_changed=bool(d["statusChanged"]),
            new_head=HeadState.from_wire(d["newHead"]) if "newHead" in d else None,
            new_status=WorkingStatus.from_wire(d["newStatus"]) if "newStatus" in d else None,
            new_captured_at=float(d.get("newCapturedAt", 0.0)),
        )


def diff_snapshots(old: RepoSnapshot, new: RepoSnapshot) -> SnapshotDelta:
    """Minimal delta: no commit appears both added and removed, refs listed
    only when created, deleted, or retargeted."""
    old_hashes = old.commit_hashes()
    new_by_hash = new.commit_by_hash()
    added = tuple(c for h, c in sorted(new_by_hash.items()) if h not in old_hashes)
    removed = frozenset(old_hashes - set(new_by_hash))

    old_refs = old.ref_map()
    new_refs = new.ref_map()
    changes: list[RefChange] = []
    for name in sorted(set(old_refs) | set(new_refs)):
        o, n = old_refs.get(name), new_refs.get(name)
        if o != n:
            changes.append(RefChange(name=name, old_target=o, new_target=n))

    head_changed = old.head != new.head
    status_changed = old.status != new.status
    return SnapshotDelta(
        added_commit_nodes=added,
        removed_commits=removed,
        changed_refs=tuple(changes),
        head_changed=head_changed,
        status_changed=status_changed,
        new_head=new.head if head_changed else None,
        new_status=new.status if status_changed else None,
        new_captured_at=new.captured_at,
    )


def apply_delta(old: RepoSnapshot, delta: SnapshotDelta) -> RepoSnapshot:
    """Rebuild the successor snapshot from its predecessor plus a delta."""
    commits = {c.hash: c for c in old.commits if c.hash not in delta.removed_commits}
    for c in delta.added_commit_nodes:
        commits[c.hash] = c

    refs = {r.name: r for r in old.refs}
    from .model import RefEntry, RefKind  # local import avoids a cycle at module load

    for change in delta.changed_refs:
        if change.new_target is None:
            refs.pop(change.name, None)
        else:
            if change.name.startswith("refs/heads/"):
                kind = RefKind.LOCAL_BRANCH
            elif change.name.startswith("refs/remotes/"):
                kind = RefKind.REMOTE_TRACKING
            else:
                kind = RefKind.TAG
            refs[change.name] = RefEntry(name=change.name, kind=kind, target=change.new_target)

    head = delta.new_head if delta.head_changed and delta.new_head is not None else old.head
    status = (
        delta.new_status if delta.status_changed and delta.new_status is not None else old.status
    )
    return make_snapshot(
        list(commits.values()),
        list(refs.values()),
        head,
        status,
        captured_at=delta.new_captured_at or old.captured_at,
    )
