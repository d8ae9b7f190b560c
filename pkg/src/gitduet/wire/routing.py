"""Recipient selection and the read-only guard.

Two rules shape all routing. First, a member's own surface is server
driven: terminal output and repository state echo back to whoever caused
them. Second, peer awareness only flows in split mode; a regular-mode room
never delivers one member's activity to the other. The guard sits in front
of every state-mutating payload and rejects anything aimed at a workspace
the sender does not own - partners advise, they never drive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

from ..errors import NotAMember
from .codec import SERVER_SENDER, Envelope
from .payloads import (
    PAYLOAD_REGISTRY,
    CursorMoved,
    ErrorPayload,
    FileContent,
    FileSaved,
    FileWrite,
    FocusChanged,
    GradeUpdate,
    Presence,
    RepoState,
    TaskAdvance,
    TerminalInput,
    TerminalOutput,
)


class RoomMode(str, Enum):
    SPLIT = "split"
    REGULAR = "regular"


@dataclass(frozen=True)
class RoomView:
    """The slice of room state routing decisions depend on."""

    mode: RoomMode
    member_roles: Mapping[str, str]  # member id -> "localA" | "localB"
    session_owners: Mapping[str, str] = field(default_factory=dict)  # session id -> role

    def member_for_role(self, role: str) -> Optional[str]:
        for member_id, member_role in self.member_roles.items():
            if member_role == role:
                return member_id
        return None

    def peer_of(self, member_id: str) -> Optional[str]:
        for other in self.member_roles:
            if other != member_id:
                return other
        return None


# payload kinds a client may originate; everything else is server-only
CLIENT_KINDS = frozenset(
    {TerminalInput.kind, FileWrite.kind, CursorMoved.kind, FocusChanged.kind, TaskAdvance.kind}
)
SERVER_KINDS = frozenset(PAYLOAD_REGISTRY) - CLIENT_KINDS

# client kinds whose acceptance changes workspace or room state
MUTATING_KINDS = frozenset({TerminalInput.kind, FileWrite.kind, TaskAdvance.kind})

READ_ONLY_PEER = "READ_ONLY_PEER"
UNKNOWN_SESSION = "UNKNOWN_SESSION"
INVALID_PAYLOAD = "INVALID_PAYLOAD"


@dataclass(frozen=True)
class GuardDecision:
    accepted: bool
    error_code: Optional[str] = None
    detail: str = ""


def _guard_terminal_input(envelope: Envelope, view: RoomView) -> GuardDecision:
    payload: TerminalInput = envelope.payload
    owner_role = view.session_owners.get(payload.session_id)
    if owner_role is None:
        return GuardDecision(False, UNKNOWN_SESSION, f"no session {payload.session_id}")
    if owner_role != view.member_roles[envelope.sender_id]:
        return GuardDecision(
            False, READ_ONLY_PEER, "terminal input may only target the sender's own workspace"
        )
    return GuardDecision(True)


def _guard_file_write(envelope: Envelope, view: RoomView) -> GuardDecision:
    payload: FileWrite = envelope.payload
    if payload.workspace_role != view.member_roles[envelope.sender_id]:
        return GuardDecision(
            False, READ_ONLY_PEER, "files may only be written in the sender's own workspace"
        )
    return GuardDecision(True)


def _guard_pass(envelope: Envelope, view: RoomView) -> GuardDecision:
    return GuardDecision(True)


# every client-originated kind needs an explicit entry; an exhaustiveness
# test fails the build when a new mutating variant lacks a rule
GUARD_RULES = {
    TerminalInput.kind: _guard_terminal_input,
    FileWrite.kind: _guard_file_write,
    TaskAdvance.kind: _guard_pass,
    CursorMoved.kind: _guard_pass,
    FocusChanged.kind: _guard_pass,
}


def apply_read_only_guard(envelope: Envelope, view: RoomView) -> GuardDecision:
    """Accept or reject a client-originated envelope."""
    if envelope.sender_id == SERVER_SENDER:
        return GuardDecision(True)
    if envelope.sender_id not in view.member_roles:
        raise NotAMember(f"{envelope.sender_id} is not a member of this room")
    kind = envelope.payload.kind
    if kind not in CLIENT_KINDS:
        return GuardDecision(False, INVALID_PAYLOAD, f"clients may not send {kind}")
    return GUARD_RULES[kind](envelope, view)


def route(envelope: Envelope, view: RoomView) -> frozenset[str]:
    """Member ids that must receive this envelope."""
    payload = envelope.payload
    members = frozenset(view.member_roles)
    split = view.mode is RoomMode.SPLIT

    if envelope.sender_id == SERVER_SENDER:
        if isinstance(payload, (Presence, TaskAdvance, GradeUpdate, ErrorPayload)):
            return members
        if isinstance(payload, (TerminalOutput, FileSaved, FileContent)):
            owner = view.member_for_role(payload.workspace_role)
            if split:
                return members
            return frozenset({owner}) if owner else frozenset()
        if isinstance(payload, RepoState):
            if payload.scope == "remote":
                # one shared hub; its state is identical for both recipients
                return members
            owner = view.member_for_role(payload.workspace_role)
            if split:
                return members
            return frozenset({owner}) if owner else frozenset()
        return frozenset()

    if envelope.sender_id not in view.member_roles:
        raise NotAMember(f"{envelope.sender_id} is not a member of this room")

    if isinstance(payload, (CursorMoved, FocusChanged)):
        if not split:
            return frozenset()
        peer = view.peer_of(envelope.sender_id)
        return frozenset({peer}) if peer else frozenset()

    # terminal input, file writes, and task confirmations are consumed by
    # the server; their observable effects come back as server envelopes
    return frozenset()
