"""Repository state extraction by querying the git executable.

All reads go through machine-readable plumbing output (`for-each-ref`,
`log` with NUL/RS separated custom formats, `status --porcelain -z`),
never through porcelain meant for humans.
"""

from __future__ import annotations

import subprocess
import time
from pathlib import Path

from ..errors import GitInvocationFailed, NotARepository, SnapshotTooLarge, UnknownRef
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

MAX_COMMITS = 10_000

_FIELD_SEP = "\x1f"
_RECORD_SEP = "\x1e"


def run_git(root: Path | str, *args: str, check: bool = True) -> subprocess.CompletedProcess:
    proc = subprocess.run(
        ["git", "-C", str(root), *args],
        capture_output=True,
        text=True,
        env=_plumbing_env(),
    )
    if check and proc.returncode != 0:
        raise GitInvocationFailed(
            f"git {' '.join(args)} exited {proc.returncode}",
            stderr=proc.stderr,
        )
    return proc


def _plumbing_env() -> dict:
    import os

    env = dict(os.environ)
    # Keep extraction independent of operator-level git configuration.
    env["GIT_CONFIG_NOSYSTEM"] = "1"
    env.setdefault("GIT_TERMINAL_PROMPT", "0")
    env["LC_ALL"] = "C.UTF-8"
    return env


def is_repository(root: Path | str) -> bool:
    proc = run_git(root, "rev-parse", "--git-dir", check=False)
    return proc.returncode == 0


def ensure_repository(root: Path | str) -> None:
    if not Path(root).is_dir() or not is_repository(root):
        raise NotARepository(f"no git repository at {root}")


def is_bare(root: Path | str) -> bool:
    proc = run_git(root, "rev-parse", "--is-bare-repository")
    return proc.stdout.strip() == "true"


def _list_refs(root: Path | str) -> list[RefEntry]:
    fmt = "%(refname)%00%(objecttype)%00%(objectname)%00%(*objecttype)%00%(*objectname)"
    proc = run_git(
        root, "for-each-ref", f"--format={fmt}", "refs/heads", "refs/remotes", "refs/tags"
    )
    refs: list[RefEntry] = []
    for line in proc.stdout.splitlines():
        if not line:
            continue
        name, objtype, objname, peeled_type, peeled = line.split("\x00")
        if name.startswith("refs/heads/"):
            kind = RefKind.LOCAL_BRANCH
        elif name.startswith("refs/remotes/"):
            kind = RefKind.REMOTE_TRACKING
        else:
            kind = RefKind.TAG
        if objtype == "commit":
            target = objname
        elif objtype == "tag" and peeled_type == "commit":
            target = peeled
        else:
            # tags pointing at trees/blobs have no commit tip to report
            continue
        if name.endswith("/HEAD") and kind is RefKind.REMOTE_TRACKING:
            # origin/HEAD is an alias, not a branch state of its own
            continue
        refs.append(RefEntry(name=name, kind=kind, target=target))
    return refs


def _read_head(root: Path | str, ref_names: set[str]) -> HeadState:
    sym = run_git(root, "symbolic-ref", "-q", "HEAD", check=False)
    if sym.returncode == 0:
        ref = sym.stdout.strip()
        if ref in ref_names:
            return HeadState(mode=HeadMode.ATTACHED, ref=ref)
        return HeadState(mode=HeadMode.UNBORN, ref=ref)
    resolved = run_git(root, "rev-parse", "--verify", "--quiet", "HEAD", check=False)
    if resolved.returncode == 0:
        return HeadState(mode=HeadMode.DETACHED, commit=resolved.stdout.strip())
    raise GitInvocationFailed("HEAD is neither symbolic nor resolvable", stderr=resolved.stderr)


def _walk_commits(root: Path | str, tips: list[str]) -> list[CommitNode]:
    if not tips:
        return []
    fmt = _FIELD_SEP.join(["%H", "%P", "%an", "%at", "%B"]) + _RECORD_SEP
    proc = run_git(root, "log", f"--format={fmt}", *sorted(set(tips)), "--")
    commits: list[CommitNode] = []
    for record in proc.stdout.split(_RECORD_SEP):
        record = record.lstrip("\n")
        if not record.strip():
            continue
        hash_, parents, author, ts, message = record.split(_FIELD_SEP, 4)
        message = message.rstrip("\n")
        commits.append(
            CommitNode(
                hash=hash_,
                parents=tuple(parents.split()) if parents else (),
                message=message,
                summary=message.splitlines()[0] if message else "",
                author=author,
                timestamp=int(ts),
            )
        )
    if len(commits) > MAX_COMMITS:
        raise SnapshotTooLarge(f"{len(commits)} commits exceeds cap of {MAX_COMMITS}")
    return commits


def _working_status(root: Path | str) -> WorkingStatus:
    proc = run_git(root, "status", "--porcelain", "-z", "--untracked-files=all")
    # one bucket per path; a path can show up in several porcelain entries
    # (e.g. staged deletion + untracked re-appearance), so apply precedence
    # staged > modified > untracked to keep the lists disjoint
    rank = {"staged": 3, "modified": 2, "untracked": 1}
    bucket: dict[str, str] = {}

    def classify(path: str, kind: str) -> None:
        if rank[kind] > rank.get(bucket.get(path, ""), 0):
            bucket[path] = kind

    entries = proc.stdout.split("\x00")
    i = 0
    while i < len(entries):
        entry = entries[i]
        i += 1
        if not entry:
            continue
        code, path = entry[:2], entry[3:]
        if code[0] in "RC":
            # rename/copy records carry the source path as the next NUL field
            i += 1
        if code == "??":
            classify(path, "untracked")
        elif code == "!!":
            continue
        else:
            if code[0] != " ":
                classify(path, "staged")
            if code[1] not in " ?":
                classify(path, "modified")
    grouped: dict[str, list[str]] = {"staged": [], "modified": [], "untracked": []}
    for path, kind in bucket.items():
        grouped[kind].append(path)
    return WorkingStatus(
        staged=tuple(sorted(grouped["staged"])),
        modified=tuple(sorted(grouped["modified"])),
        untracked=tuple(sorted(grouped["untracked"])),
    )


def snapshot(root: Path | str) -> RepoSnapshot:
    """Extract the full observable state of the repository at ``root``.

    Includes exactly the commits reachable from refs and HEAD. Bare
    repositories yield empty working status lists.
    """
    ensure_repository(root)
    refs = _list_refs(root)
    head = _read_head(root, {r.name for r in refs})
    tips = [r.target for r in refs]
    if head.mode is HeadMode.DETACHED and head.commit:
        tips.append(head.commit)
    commits = _walk_commits(root, tips)
    status = WorkingStatus() if is_bare(root) else _working_status(root)
    return make_snapshot(commits, refs, head, status, captured_at=time.time())


def tree_digest(root: Path | str, ref_name: str) -> str:
    """Content hash of the directory tree at a ref tip.

    Equal digests imply byte-identical content by git's own addressing.
    """
    ensure_repository(root)
    proc = run_git(root, "rev-parse", "--verify", "--quiet", f"{ref_name}^{{tree}}", check=False)
    if proc.returncode != 0:
        raise UnknownRef(f"{ref_name} does not resolve in {root}")
    return proc.stdout.strip()
