"""Repository-state equivalence used for grading.

Two repositories count as equivalent when they have the same set of local
branch names and, branch by branch, byte-identical tree content at the tips.
Commit hashes, messages, authors, timestamps, and history topology are
deliberately ignored: a learner who reaches the target content through
rebase instead of merge (or in a different order than the reference run)
still matches. An optional strict mode additionally compares a
content-addressed fingerprint of the commit graph shape.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .extract import ensure_repository, run_git


@dataclass(frozen=True)
class StateDigest:
    # short branch name -> tree hash at the tip
    branches: tuple[tuple[str, str], ...]
    # short branch name -> graph-shape fingerprint (trees + parent structure)
    topology: tuple[tuple[str, str], ...] = ()

    def branch_map(self) -> dict[str, str]:
        return dict(self.branches)

    def topology_map(self) -> dict[str, str]:
        return dict(self.topology)

    def to_wire(self) -> dict:
        return {
            "branches": {name: digest for name, digest in self.branches},
            "topology": {name: digest for name, digest in self.topology},
        }

    @classmethod
    def from_wire(cls, d: dict) -> "StateDigest":
        return cls(
            branches=tuple(sorted(d["branches"].items())),
            topology=tuple(sorted(d.get("topology", {}).items())),
        )


def capture_state_digest(root: Path | str) -> StateDigest:
    """Branch tip tree digests plus graph-shape fingerprints for ``root``."""
    ensure_repository(root)
    fmt = "%(refname:short)%00%(objectname)"
    proc = run_git(root, "for-each-ref", f"--format={fmt}", "refs/heads")
    tips: dict[str, str] = {}
    for line in proc.stdout.splitlines():
        if not line:
            continue
        name, target = line.split("\x00")
        tips[name] = target

    branches: dict[str, str] = {}
    shapes = _shape_ids(root, list(tips.values()))
    trees = _tip_trees(root, list(tips.values()))
    for name, tip in tips.items():
        branches[name] = trees[tip]
    topology = {name: shapes[tip] for name, tip in tips.items()}
    return StateDigest(
        branches=tuple(sorted(branches.items())),
        topology=tuple(sorted(topology.items())),
    )


def _tip_trees(root: Path | str, tips: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for tip in set(tips):
        proc = run_git(root, "rev-parse", f"{tip}^{{tree}}")
        out[tip] = proc.stdout.strip()
    return out


def _shape_ids(root: Path | str, tips: list[str]) -> dict[str, str]:
    """Merkle fingerprint per commit over (tree hash, parent fingerprints).

    Identifies history shape and content while staying blind to hashes,
    authorship, messages, and times.
    """
    if not tips:
        return {}
    proc = run_git(root, "log", "--format=%H %T %P", *sorted(set(tips)), "--")
    tree_of: dict[str, str] = {}
    parents_of: dict[str, tuple[str, ...]] = {}
    for line in proc.stdout.splitlines():
        if not line.strip():
            continue
        parts = line.split()
        h, tree, parents = parts[0], parts[1], tuple(parts[2:])
        tree_of[h] = tree
        parents_of[h] = parents

    shape: dict[str, str] = {}

    def resolve(h: str) -> str:
        # iterative post-order; training histories are shallow but be safe
        stack = [h]
        while stack:
            cur = stack[-1]
            if cur in shape:
                stack.pop()
                continue
            pending = [p for p in parents_of.get(cur, ()) if p not in shape and p in tree_of]
            if pending:
                stack.extend(pending)
                continue
            material = tree_of[cur] + "|" + ",".join(
                shape[p] for p in parents_of.get(cur, ()) if p in shape
            )
            shape[cur] = hashlib.sha1(material.encode()).hexdigest()
            stack.pop()
        return shape[h]

    for tip in set(tips):
        if tip in tree_of:
            resolve(tip)
    return shape


def state_equivalent(a: StateDigest, b: StateDigest, strict_topology: bool = False) -> bool:
    """True iff branch name sets match and every tip tree digest matches."""
    if a.branch_map() != b.branch_map():
        return False
    if strict_topology and a.topology_map() != b.topology_map():
        return False
    return True
