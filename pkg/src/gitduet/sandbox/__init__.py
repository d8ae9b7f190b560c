"""Sandboxed workspace triples, setup scripts, and pty terminal sessions."""

from .manager import (
    LOCAL_ROLES,
    RoomWorkspaces,
    SetupBundle,
    Workspace,
    WorkspaceEvents,
    WorkspaceManager,
    WorkspaceRole,
    WorkspaceState,
)
from .policy import (
    DEFAULT_ALLOWED_BINARIES,
    CommitIdentity,
    IsolationBackend,
    SandboxPolicy,
)
from .terminal import DEFAULT_DEBOUNCE, TerminalDims, TerminalSession

__all__ = [
    "CommitIdentity",
    "DEFAULT_ALLOWED_BINARIES",
    "DEFAULT_DEBOUNCE",
    "IsolationBackend",
    "LOCAL_ROLES",
    "RoomWorkspaces",
    "SandboxPolicy",
    "SetupBundle",
    "TerminalDims",
    "TerminalSession",
    "Workspace",
    "WorkspaceEvents",
    "WorkspaceManager",
    "WorkspaceRole",
    "WorkspaceState",
]
