"""Awareness wire protocol: envelopes, codec, routing, read-only guard."""

from .codec import FRAME_CAP, SERVER_SENDER, Envelope, decode, encode
from .payloads import (
    COMPONENTS,
    PAYLOAD_REGISTRY,
    PAYLOAD_TYPES,
    PRESENCE_EVENTS,
    ROLES,
    SCOPES,
    CursorMoved,
    ErrorPayload,
    FileContent,
    FileSaved,
    FileWrite,
    FocusChanged,
    GradeUpdate,
    Payload,
    Presence,
    RepoState,
    TaskAdvance,
    TerminalInput,
    TerminalOutput,
    TextPosition,
)
from .routing import (
    CLIENT_KINDS,
    GUARD_RULES,
    INVALID_PAYLOAD,
    MUTATING_KINDS,
    READ_ONLY_PEER,
    SERVER_KINDS,
    UNKNOWN_SESSION,
    GuardDecision,
    RoomMode,
    RoomView,
    apply_read_only_guard,
    route,
)

__all__ = [
    "CLIENT_KINDS",
    "COMPONENTS",
    "CursorMoved",
    "Envelope",
    "ErrorPayload",
    "FRAME_CAP",
    "FileContent",
    "FileSaved",
    "FileWrite",
    "FocusChanged",
    "GUARD_RULES",
    "GradeUpdate",
    "GuardDecision",
    "INVALID_PAYLOAD",
    "MUTATING_KINDS",
    "PAYLOAD_REGISTRY",
    "PAYLOAD_TYPES",
    "PRESENCE_EVENTS",
    "Payload",
    "Presence",
    "READ_ONLY_PEER",
    "ROLES",
    "RepoState",
    "RoomMode",
    "RoomView",
    "SCOPES",
    "SERVER_KINDS",
    "SERVER_SENDER",
    "TaskAdvance",
    "TerminalInput",
    "TerminalOutput",
    "TextPosition",
    "UNKNOWN_SESSION",
    "apply_read_only_guard",
    "decode",
    "encode",
    "route",
]
