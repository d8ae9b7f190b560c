"""Setup-script execution.

Exercise scripts are POSIX shell, run with the workspace root as working
directory and the ROLE / REMOTE_URL / WORKSPACE_ROOT contract in the
environment. Exit status zero means success; anything else aborts
provisioning.
"""

from __future__ import annotations

import subprocess
from pathlib import Path

from ..errors import SetupScriptFailed
from .policy import (
    SETUP_IDENTITY,
    SandboxPolicy,
    resource_limiter,
    sandbox_env,
)

SCRIPT_TIMEOUT = 60.0


def run_setup_script(
    script: Path,
    workspace_root: Path,
    role: str,
    remote_url: str,
    policy: SandboxPolicy,
    farm_dir: Path,
    scratch_dir: Path,
    ceiling_dir: Path,
    timeout: float = SCRIPT_TIMEOUT,
) -> None:
    env = sandbox_env(
        policy,
        farm_dir,
        workspace_root,
        scratch_dir,
        ceiling_dir,
        identity=SETUP_IDENTITY,
        extra={
            "ROLE": role,
            "REMOTE_URL": remote_url,
            "WORKSPACE_ROOT": str(workspace_root),
        },
    )
    try:
        proc = subprocess.run(
            ["bash", str(script)],
            cwd=str(workspace_root),
            env=env,
            capture_output=True,
            text=True,
            timeout=timeout,
            preexec_fn=resource_limiter(policy),
        )
    except subprocess.TimeoutExpired as exc:
        raise SetupScriptFailed(
            f"setup script {script.name} timed out after {timeout:.0f}s",
            stderr=(exc.stderr or b"").decode() if isinstance(exc.stderr, bytes) else (exc.stderr or ""),
        ) from exc
    if proc.returncode != 0:
        tail = "\n".join(proc.stderr.splitlines()[-12:])
        raise SetupScriptFailed(
            f"setup script {script.name} exited {proc.returncode} (role {role})",
            stderr=tail,
        )
