"""Execution policies for learner workspaces.

The default ``tempdir_process`` backend confines commands through a
restricted child-process environment: a PATH farm containing only the
allowed binaries, HOME and TMPDIR relocated inside the workspace, git
transport locked to the local filesystem, and git repository discovery
ceilinged at the workspace tree. It does not impose kernel-level
confinement; the ``container`` backend exists for deployments that need
that and is selected through the same policy object.
"""

from __future__ import annotations

import os
import shutil
import subprocess
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from ..errors import IsolationUnavailable

DEFAULT_ALLOWED_BINARIES: tuple[str, ...] = (
    "git",
    "bash",
    "sh",
    "vim",
    "vi",
    "nano",
    "less",
    "more",
    "ls",
    "cat",
    "cp",
    "mv",
    "rm",
    "mkdir",
    "rmdir",
    "touch",
    "echo",
    "printf",
    "sed",
    "grep",
    "find",
    "head",
    "tail",
    "wc",
    "sort",
    "uniq",
    "diff",
    "awk",
    "tr",
    "env",
    "date",
    "mktemp",
    "sleep",
    "dirname",
    "basename",
    "chmod",
    "true",
    "false",
)


class IsolationBackend(str, Enum):
    TEMPDIR_PROCESS = "tempdir_process"
    CONTAINER = "container"


@dataclass(frozen=True)
class SandboxPolicy:
    isolation: IsolationBackend = IsolationBackend.TEMPDIR_PROCESS
    network_allowed: bool = False
    cpu_seconds: Optional[int] = None
    memory_bytes: Optional[int] = None
    allowed_binaries: tuple[str, ...] = DEFAULT_ALLOWED_BINARIES

    def ensure_available(self) -> None:
        if self.isolation is IsolationBackend.TEMPDIR_PROCESS:
            if shutil.which("git") is None or shutil.which("bash") is None:
                raise IsolationUnavailable("tempdir_process backend needs git and bash on PATH")
            return
        probe = shutil.which("docker")
        if probe is None:
            raise IsolationUnavailable("container backend requires a docker client")
        check = subprocess.run(
            ["docker", "info"], capture_output=True, timeout=10
        )
        if check.returncode != 0:
            raise IsolationUnavailable("docker daemon not reachable")


def build_command_farm(policy: SandboxPolicy, farm_dir: Path) -> Path:
    """Populate ``farm_dir`` with symlinks to the allowed binaries.

    Binaries absent from the host are skipped silently: the allow-list is
    an upper bound, not an inventory promise.
    """
    farm_dir.mkdir(parents=True, exist_ok=True)
    for name in policy.allowed_binaries:
        source = shutil.which(name)
        if source is None:
            continue
        link = farm_dir / name
        if link.is_symlink() or link.exists():
            continue
        link.symlink_to(source)
    return farm_dir


@dataclass(frozen=True)
class CommitIdentity:
    name: str = "Learner"
    email: str = "learner@gitduet.local"


SETUP_IDENTITY = CommitIdentity(name="Exercise Setup", email="setup@gitduet.local")


def sandbox_env(
    policy: SandboxPolicy,
    farm_dir: Path,
    workspace_root: Path,
    scratch_dir: Path,
    ceiling_dir: Path,
    identity: CommitIdentity = CommitIdentity(),
    extra: Optional[dict] = None,
) -> dict:
    home = scratch_dir / "home"
    tmp = scratch_dir / "tmp"
    home.mkdir(parents=True, exist_ok=True)
    tmp.mkdir(parents=True, exist_ok=True)
    env = {
        "PATH": str(farm_dir),
        "HOME": str(home),
        "TMPDIR": str(tmp),
        "TERM": "xterm",
        "LANG": "C.UTF-8",
        "LC_ALL": "C.UTF-8",
        "SHELL": str(farm_dir / "bash"),
        "PWD": str(workspace_root),
        "GIT_CONFIG_NOSYSTEM": "1",
        "GIT_TERMINAL_PROMPT": "0",
        # stop git from discovering repositories above the sandbox
        "GIT_CEILING_DIRECTORIES": str(ceiling_dir),
        "GIT_AUTHOR_NAME": identity.name,
        "GIT_AUTHOR_EMAIL": identity.email,
        "GIT_COMMITTER_NAME": identity.name,
        "GIT_COMMITTER_EMAIL": identity.email,
        "HISTFILE": "",
        "PS1": r"\W$ ",
    }
    if not policy.network_allowed:
        env["GIT_ALLOW_PROTOCOL"] = "file"
    for editor in ("vim", "vi", "nano"):
        if (farm_dir / editor).exists():
            env["EDITOR"] = editor
            env["GIT_EDITOR"] = editor
            break
    if extra:
        env.update(extra)
    return env


def resource_limiter(policy: SandboxPolicy):
    """preexec hook applying rlimits; None when the policy sets no quotas."""
    if policy.cpu_seconds is None and policy.memory_bytes is None:
        return None
    import resource

    def apply():
        if policy.cpu_seconds is not None:
            resource.setrlimit(resource.RLIMIT_CPU, (policy.cpu_seconds, policy.cpu_seconds))
        if policy.memory_bytes is not None:
            resource.setrlimit(resource.RLIMIT_AS, (policy.memory_bytes, policy.memory_bytes))

    return apply
