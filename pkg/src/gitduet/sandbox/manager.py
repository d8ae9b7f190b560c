"""Lifecycle of the three per-room workspaces.

A room owns two non-bare clones (one per learner) and one bare repository
acting as the shared remote, all rooted under one room directory:

    <base>/<room-id>/remote      bare hub repository
    <base>/<room-id>/local_a     learner A clone, origin -> ../remote
    <base>/<room-id>/local_b     learner B clone, origin -> ../remote

Provisioning seeds the remote through the exercise's common script (run in
a throwaway clone that pushes), then applies each role script inside the
matching local clone. Reset replays the whole sequence, which restores
state equivalence with the original provisioning because tree content is
what the scripts determine; commit hashes are free to differ.
"""

from __future__ import annotations

import hashlib
import os
import secrets
import shutil
import stat
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

from ..errors import (
    FileNotFound,
    PathEscape,
    SessionAlreadyOpen,
    SetupScriptFailed,
    WorkspaceNotReady,
)
from ..repostate import run_git
from .policy import (
    CommitIdentity,
    IsolationBackend,
    SandboxPolicy,
    build_command_farm,
    resource_limiter,
    sandbox_env,
)
from .scripts import run_setup_script
from .terminal import DEFAULT_DEBOUNCE, TerminalDims, TerminalSession


class WorkspaceRole(str, Enum):
    LOCAL_A = "localA"
    LOCAL_B = "localB"
    REMOTE = "remote"


LOCAL_ROLES = (WorkspaceRole.LOCAL_A, WorkspaceRole.LOCAL_B)

_ROLE_DIRS = {
    WorkspaceRole.LOCAL_A: "local_a",
    WorkspaceRole.LOCAL_B: "local_b",
    WorkspaceRole.REMOTE: "remote",
}

_ROLE_ENV = {
    WorkspaceRole.LOCAL_A: "A",
    WorkspaceRole.LOCAL_B: "B",
    WorkspaceRole.REMOTE: "REMOTE",
}


class WorkspaceState(str, Enum):
    PROVISIONING = "provisioning"
    READY = "ready"
    RESETTING = "resetting"
    DESTROYED = "destroyed"


@dataclass
class Workspace:
    id: str
    role: WorkspaceRole
    root: Path
    state: WorkspaceState = WorkspaceState.PROVISIONING

    def require_ready(self) -> None:
        if self.state is not WorkspaceState.READY:
            raise WorkspaceNotReady(f"workspace {self.id} is {self.state.value}")

    def scratch_dir(self) -> Path:
        # scratch lives inside the workspace root so even HOME/TMPDIR
        # writes stay confined; for clones it hides under .git
        if self.role in LOCAL_ROLES:
            return self.root / ".git" / ".sandbox"
        return self.root / ".sandbox"


@dataclass
class SetupBundle:
    """Paths to the three provisioning scripts of an exercise."""

    common: Path
    role_a: Path
    role_b: Path


@dataclass
class WorkspaceEvents:
    """Hooks the session layer attaches to observe workspace activity."""

    terminal_output: Callable[[WorkspaceRole, str, bytes], None] = lambda role, sid, data: None
    terminal_quiescence: Callable[[WorkspaceRole], None] = lambda role: None
    terminal_closed: Callable[[WorkspaceRole, str], None] = lambda role, sid: None
    file_saved: Callable[[WorkspaceRole, str, str], None] = lambda role, path, digest: None


class RoomWorkspaces:
    """The provisioned triple plus its terminals, file API, and locks."""

    def __init__(self, room_id: str, room_dir: Path, manager: "WorkspaceManager"):
        self.room_id = room_id
        self.room_dir = room_dir
        self._manager = manager
        self.events = WorkspaceEvents()
        self._lock = threading.RLock()
        self._ws_locks = {role: threading.RLock() for role in WorkspaceRole}
        self._terminals: dict[WorkspaceRole, TerminalSession] = {}
        self.provision_seconds = 0.0
        self.workspaces: dict[WorkspaceRole, Workspace] = {
            role: Workspace(
                id=f"{room_id}-{role.value}",
                role=role,
                root=room_dir / _ROLE_DIRS[role],
            )
            for role in WorkspaceRole
        }
        self.destroyed = False

    # --- accessors -----------------------------------------------------

    @property
    def local_a(self) -> Workspace:
        return self.workspaces[WorkspaceRole.LOCAL_A]

    @property
    def local_b(self) -> Workspace:
        return self.workspaces[WorkspaceRole.LOCAL_B]

    @property
    def remote(self) -> Workspace:
        return self.workspaces[WorkspaceRole.REMOTE]

    def workspace(self, role: WorkspaceRole) -> Workspace:
        return self.workspaces[role]

    def terminal(self, role: WorkspaceRole) -> Optional[TerminalSession]:
        return self._terminals.get(role)

    def terminal_by_session(self, session_id: str) -> Optional[tuple[WorkspaceRole, TerminalSession]]:
        for role, term in self._terminals.items():
            if term.session_id == session_id:
                return role, term
        return None

    def lock_for(self, role: WorkspaceRole) -> threading.RLock:
        return self._ws_locks[role]

    # --- terminals -------------------------------------------------------

    def open_terminal(
        self,
        role: WorkspaceRole,
        dims: TerminalDims = TerminalDims(),
        identity: CommitIdentity = CommitIdentity(),
    ) -> TerminalSession:
        if role not in LOCAL_ROLES:
            raise WorkspaceNotReady("the bare remote is never operated directly")
        with self._lock:
            ws = self.workspaces[role]
            ws.require_ready()
            existing = self._terminals.get(role)
            if existing is not None and not existing.closed:
                raise SessionAlreadyOpen(f"workspace {ws.id} already has a live terminal")
            env = self._manager.workspace_env(self, ws, identity)
            sid = secrets.token_hex(8)
            session = TerminalSession(
                workspace_id=ws.id,
                cwd=ws.root,
                env=env,
                dims=dims,
                on_output=lambda data, r=role, s=sid: self.events.terminal_output(r, s, data),
                on_quiescence=lambda r=role: self.events.terminal_quiescence(r),
                on_close=lambda r=role, s=sid: self.events.terminal_closed(r, s),
                debounce=self._manager.snapshot_debounce,
                preexec_extra=resource_limiter(self._manager.policy),
                session_id=sid,
            )
            self._terminals[role] = session
            return session

    def close_terminals(self) -> None:
        with self._lock:
            terms = dict(self._terminals)
        for term in terms.values():
            term.close()
        with self._lock:
            for role, term in terms.items():
                if self._terminals.get(role) is term:
                    del self._terminals[role]

    # --- file API --------------------------------------------------------

    def read_file(self, role: WorkspaceRole, relative: str) -> bytes:
        ws = self.workspaces[role]
        with self._ws_locks[role]:
            ws.require_ready()
            target = _resolve_inside(ws.root, relative)
            if not target.is_file():
                raise FileNotFound(f"{relative} does not exist in {ws.id}")
            return target.read_bytes()

    def write_file(self, role: WorkspaceRole, relative: str, data: bytes) -> str:
        if role not in LOCAL_ROLES:
            raise WorkspaceNotReady("files can only be written in learner workspaces")
        ws = self.workspaces[role]
        with self._ws_locks[role]:
            ws.require_ready()
            target = _resolve_inside(ws.root, relative, for_write=True)
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(data)
            digest = hashlib.sha256(data).hexdigest()
        self.events.file_saved(role, relative, digest)
        return digest

    def list_files(self, role: WorkspaceRole) -> list[str]:
        ws = self.workspaces[role]
        with self._ws_locks[role]:
            ws.require_ready()
            out: list[str] = []
            for path in sorted(ws.root.rglob("*")):
                rel = path.relative_to(ws.root)
                if rel.parts and rel.parts[0] in (".git", ".sandbox"):
                    continue
                if path.is_file():
                    out.append(str(rel))
            return out


def _resolve_inside(root: Path, relative: str, for_write: bool = False) -> Path:
    """Resolve ``relative`` strictly inside ``root``; reject `..`, absolute
    paths, symlink escapes, and anything under the repository's internals."""
    if not relative or relative.startswith(("/", "\\")):
        raise PathEscape(f"path must be relative: {relative!r}")
    parts = Path(relative).parts
    if any(p == ".." for p in parts):
        raise PathEscape(f"path may not traverse upward: {relative!r}")
    if parts and parts[0] in (".git", ".sandbox"):
        raise PathEscape("repository internals are not part of the editable tree")
    candidate = root / relative
    probe = candidate.parent if for_write else candidate
    real_root = root.resolve()
    try:
        real_probe = probe.resolve()
    except OSError as exc:
        raise PathEscape(f"unresolvable path: {relative!r}") from exc
    if real_root != real_probe and real_root not in real_probe.parents:
        raise PathEscape(f"path escapes the workspace: {relative!r}")
    return candidate


class WorkspaceManager:
    """Provisions, resets, and destroys room workspace triples."""

    def __init__(
        self,
        base_dir: Path | str,
        policy: SandboxPolicy = SandboxPolicy(),
        snapshot_debounce: float = DEFAULT_DEBOUNCE,
    ):
        policy.ensure_available()
        if policy.isolation is IsolationBackend.CONTAINER:
            # the docker client responded, but this build drives repos
            # directly on the host filesystem; container provisioning is
            # a deployment concern layered on the same policy surface
            raise NotImplementedError("container provisioning is not wired in this build")
        self.base_dir = Path(base_dir)
        self.base_dir.mkdir(parents=True, exist_ok=True)
        self.policy = policy
        self.snapshot_debounce = snapshot_debounce
        self._farm = build_command_farm(policy, self.base_dir / ".bin")

    # --- environment -----------------------------------------------------

    def workspace_env(
        self, room: RoomWorkspaces, ws: Workspace, identity: CommitIdentity
    ) -> dict:
        return sandbox_env(
            self.policy,
            self._farm,
            ws.root,
            ws.scratch_dir(),
            ceiling_dir=self.base_dir,
            identity=identity,
        )

    # --- lifecycle ------------------------------------------------------

    def provision_room(self, scripts: SetupBundle, room_id: Optional[str] = None) -> RoomWorkspaces:
        room_id = room_id or secrets.token_hex(6)
        room_dir = self.base_dir / room_id
        if room_dir.exists():
            raise SetupScriptFailed(f"room directory {room_dir} already exists")
        room_dir.mkdir(parents=True)
        room = RoomWorkspaces(room_id, room_dir, self)
        try:
            self._provision_into(room, scripts)
        except Exception:
            shutil.rmtree(room_dir, ignore_errors=True)
            raise
        return room

    def _provision_into(self, room: RoomWorkspaces, scripts: SetupBundle) -> None:
        started = time.monotonic()
        remote = room.remote
        run_git(room.room_dir, "init", "-q", "--bare", "--initial-branch=main",
                str(remote.root))

        # the common script seeds the hub from a throwaway clone that pushes
        seed_dir = room.room_dir / ".seed"
        seed_dir.mkdir()
        run_git(room.room_dir, "clone", "-q", str(remote.root), str(seed_dir))
        self._run_script(scripts.common, seed_dir, WorkspaceRole.REMOTE, remote.root)
        shutil.rmtree(seed_dir)

        for role, script in (
            (WorkspaceRole.LOCAL_A, scripts.role_a),
            (WorkspaceRole.LOCAL_B, scripts.role_b),
        ):
            ws = room.workspaces[role]
            run_git(room.room_dir, "clone", "-q", str(remote.root), str(ws.root))
            self._run_script(script, ws.root, role, remote.root)

        for ws in room.workspaces.values():
            ws.state = WorkspaceState.READY
        room.provision_seconds = time.monotonic() - started

    def _run_script(self, script: Path, root: Path, role: WorkspaceRole, remote_root: Path) -> None:
        scratch = root / (".git/.sandbox" if role in LOCAL_ROLES else ".sandbox")
        run_setup_script(
            Path(script),
            workspace_root=root,
            role=_ROLE_ENV[role],
            remote_url=str(remote_root),
            policy=self.policy,
            farm_dir=self._farm,
            scratch_dir=scratch,
            ceiling_dir=self.base_dir,
        )
        if scratch.exists():
            shutil.rmtree(scratch, ignore_errors=True)

    def reset_room(self, room: RoomWorkspaces, scripts: SetupBundle) -> None:
        """Re-provision all three workspaces from the exercise scripts."""
        with room._lock:
            if room.destroyed:
                raise WorkspaceNotReady(f"room {room.room_id} is destroyed")
            for ws in room.workspaces.values():
                ws.require_ready()
            locks = [room.lock_for(role) for role in WorkspaceRole]
            for lock in locks:
                lock.acquire()
            try:
                for ws in room.workspaces.values():
                    ws.state = WorkspaceState.RESETTING
                room.close_terminals()
                for ws in room.workspaces.values():
                    shutil.rmtree(ws.root, ignore_errors=True)
                seed_leftover = room.room_dir / ".seed"
                shutil.rmtree(seed_leftover, ignore_errors=True)
                try:
                    self._provision_into(room, scripts)
                except Exception:
                    self.destroy_room(room)
                    raise
            finally:
                for lock in reversed(locks):
                    lock.release()

    def destroy_room(self, room: RoomWorkspaces) -> None:
        """Close sessions, then remove every workspace directory. Idempotent."""
        with room._lock:
            if room.destroyed:
                return
            room.destroyed = True
        # sessions observe the close before the trees disappear
        room.close_terminals()
        for ws in room.workspaces.values():
            ws.state = WorkspaceState.DESTROYED
        shutil.rmtree(room.room_dir, ignore_errors=True)
