"""Deterministic randomized repository builders shared across test modules.

A "script" is a seed-derived list of plain git operations. Replaying the
same script twice produces different commit hashes (timestamps differ) but
identical branch content, which is exactly what the equivalence relation
must tolerate.
"""

from __future__ import annotations

import random
from pathlib import Path

from conftest import git

Step = tuple


def build_random_script(seed: int, length: int = 12) -> list[Step]:
    rng = random.Random(seed)
    steps: list[Step] = [("commit", "main", "base.txt", f"seed {seed}", "root commit")]
    branches = ["main"]
    current = "main"
    commits_on = {"main": 1}
    counter = 1
    for _ in range(length):
        op = rng.choices(
            ["commit", "branch", "switch", "merge", "tag", "delete"],
            weights=[50, 15, 15, 10, 5, 5],
        )[0]
        if op == "commit":
            counter += 1
            name = f"{current.replace('/', '_')}_{counter}.txt"
            steps.append(("commit", current, name, f"content {counter} {rng.random():.6f}", f"change {counter}"))
            commits_on[current] = commits_on.get(current, 0) + 1
        elif op == "branch" and len(branches) < 5:
            counter += 1
            name = f"topic{counter}"
            steps.append(("branch", name))
            steps.append(("switch", name))
            branches.append(name)
            commits_on[name] = commits_on.get(current, 1)
            current = name
        elif op == "switch" and len(branches) > 1:
            target = rng.choice([b for b in branches if b != current])
            steps.append(("switch", target))
            current = target
        elif op == "merge" and len(branches) > 1:
            source = rng.choice([b for b in branches if b != current])
            steps.append(("merge", source, f"merge {source} into {current}"))
        elif op == "tag":
            counter += 1
            steps.append(("tag", f"v{counter}"))
        elif op == "delete" and len(branches) > 2:
            victim = rng.choice([b for b in branches if b not in (current, "main")])
            steps.append(("delete", victim))
            branches.remove(victim)
    return steps


def run_script(root: Path, steps: list[Step], date_base: int = 1_700_000_000) -> None:
    """Execute a script in a fresh repo at ``root`` with pinned timestamps."""
    root.mkdir(parents=True, exist_ok=True)
    git(root, "init", "-q", "--initial-branch=main")
    tick = 0

    def dates():
        nonlocal tick
        tick += 1
        stamp = f"{date_base + tick * 60} +0000"
        return {"GIT_AUTHOR_DATE": stamp, "GIT_COMMITTER_DATE": stamp}

    for step in steps:
        kind = step[0]
        if kind == "commit":
            _, _branch, filename, content, message = step
            (root / filename).write_text(content)
            git(root, "add", filename)
            git(root, "commit", "-q", "-m", message, env_extra=dates())
        elif kind == "branch":
            git(root, "branch", step[1])
        elif kind == "switch":
            git(root, "checkout", "-q", step[1])
        elif kind == "merge":
            _, source, message = step
            git(root, "merge", "-q", "--no-edit", "-m", message, source,
                env_extra=dates(), check=False)
        elif kind == "tag":
            git(root, "tag", "-f", step[1])
        elif kind == "delete":
            git(root, "branch", "-D", step[1])


def mutate_tip_file(root: Path, seed: int = 0) -> None:
    """Flip one byte in one tracked file at the current tip and commit it."""
    rng = random.Random(seed)
    listing = git(root, "ls-tree", "-r", "--name-only", "HEAD").stdout.split()
    target = rng.choice(sorted(listing))
    data = bytearray((root / target).read_bytes() or b"x")
    pos = rng.randrange(len(data))
    data[pos] = (data[pos] + 1) % 256
    (root / target).write_bytes(bytes(data))
    git(root, "add", target)
    git(root, "commit", "-q", "-m", "mutate one byte")
