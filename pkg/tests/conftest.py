import os
import random
import subprocess
from pathlib import Path

import pytest

GIT_ENV = {
    **os.environ,
    "GIT_AUTHOR_NAME": "Test Author",
    "GIT_AUTHOR_EMAIL": "author@test.local",
    "GIT_COMMITTER_NAME": "Test Committer",
    "GIT_COMMITTER_EMAIL": "committer@test.local",
    "GIT_CONFIG_NOSYSTEM": "1",
    "LC_ALL": "C.UTF-8",
}


def git(root, *args, env_extra=None, check=True):
    env = dict(GIT_ENV)
    if env_extra:
        env.update(env_extra)
    proc = subprocess.run(
        ["git", "-C", str(root), *args], capture_output=True, text=True, env=env
    )
    if check and proc.returncode != 0:
        raise AssertionError(f"git {args} failed: {proc.stderr}")
    return proc


def init_repo(root: Path, branch="main") -> Path:
    root.mkdir(parents=True, exist_ok=True)
    git(root, "init", "-q", f"--initial-branch={branch}")
    return root


def commit_file(root: Path, path: str, content: str, message: str, when: int | None = None):
    target = root / path
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(content)
    git(root, "add", path)
    env_extra = None
    if when is not None:
        stamp = f"{when} +0000"
        env_extra = {"GIT_AUTHOR_DATE": stamp, "GIT_COMMITTER_DATE": stamp}
    git(root, "commit", "-q", "-m", message, env_extra=env_extra)


@pytest.fixture
def repo(tmp_path):
    return init_repo(tmp_path / "repo")


@pytest.fixture
def rng():
    return random.Random(0xD0E7)
