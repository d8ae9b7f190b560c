"""Awareness payload variants.

Exactly one variant per envelope. Field names and kind tags below are the
normative wire vocabulary; `schema.json` next to this module documents the
same surface for non-Python clients and a test keeps the two in sync.
"""

from __future__ import annotations

import base64
import binascii
import math
from dataclasses import dataclass, field
from typing import ClassVar, Optional

from ..errors import MalformedFrame

ROLES = ("localA", "localB", "remote")
SCOPES = ("local", "remote")
COMPONENTS = ("editor", "gitTree", "terminal", "reference", "description")
PRESENCE_EVENTS = ("joined", "left", "reconnected")


def _require(condition: bool, why: str) -> None:
    if not condition:
        raise MalformedFrame(why)


def _b64decode(value, what: str) -> bytes:
    _require(isinstance(value, str), f"{what} must be base64 text")
    try:
        return base64.b64decode(value, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise MalformedFrame(f"{what} is not valid base64") from exc


def _b64encode(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _check_fields(d: dict, required: set[str], optional: set[str] = frozenset()) -> None:
    keys = set(d) - {"kind"}
    missing = required - keys
    unknown = keys - required - optional
    _require(not missing, f"missing payload fields: {sorted(missing)}")
    _require(not unknown, f"unknown payload fields: {sorted(unknown)}")


def _check_str(d: dict, name: str, allow_empty: bool = False) -> str:
    value = d[name]
    _require(isinstance(value, str), f"{name} must be a string")
    if not allow_empty:
        _require(bool(value), f"{name} must not be empty")
    return value


def _check_enum(d: dict, name: str, allowed: tuple[str, ...]) -> str:
    value = _check_str(d, name)
    _require(value in allowed, f"{name} must be one of {allowed}")
    return value


@dataclass(frozen=True)
class TerminalInput:
    kind: ClassVar[str] = "terminalInput"
    session_id: str
    data: bytes

    def to_wire(self) -> dict:
        return {"kind": self.kind, "sessionId": self.session_id, "bytes": _b64encode(self.data)}

    @classmethod
    def from_wire(cls, d: dict) -> "TerminalInput":
        _check_fields(d, {"sessionId", "bytes"})
        return cls(session_id=_check_str(d, "sessionId"), data=_b64decode(d["bytes"], "bytes"))


@dataclass(frozen=True)
class TerminalOutput:
    kind: ClassVar[str] = "terminalOutput"
    session_id: str
    workspace_role: str
    data: bytes

    def to_wire(self) -> dict:
        return {
            "kind": self.kind,
            "sessionId": self.session_id,
            "workspaceRole": self.workspace_role,
            "bytes": _b64encode(self.data),
        }

    @classmethod
    def from_wire(cls, d: dict) -> "TerminalOutput":
        _check_fields(d, {"sessionId", "workspaceRole", "bytes"})
        return cls(
            session_id=_check_str(d, "sessionId"),
            workspace_role=_check_enum(d, "workspaceRole", ROLES),
            data=_b64decode(d["bytes"], "bytes"),
        )


@dataclass(frozen=True)
class FileSaved:
    kind: ClassVar[str] = "fileSaved"
    workspace_role: str
    path: str
    new_content_digest: str

    def to_wire(self) -> dict:
        return {
            "kind": self.kind,
            "workspaceRole": self.workspace_role,
            "path": self.path,
            "newContentDigest": self.new_content_digest,
        }

    @classmethod
    def from_wire(cls, d: dict) -> "FileSaved":
        _check_fields(d, {"workspaceRole", "path", "newContentDigest"})
        return cls(
            workspace_role=_check_enum(d, "workspaceRole", ROLES),
            path=_check_str(d, "path"),
            new_content_digest=_check_str(d, "newContentDigest"),
        )


@dataclass(frozen=True)
class FileContent:
    kind: ClassVar[str] = "fileContent"
    workspace_role: str
    path: str
    data: bytes

    def to_wire(self) -> dict:
        return {
            "kind": self.kind,
            "workspaceRole": self.workspace_role,
            "path": self.path,
            "bytes": _b64encode(self.data),
        }

    @classmethod
    def from_wire(cls, d: dict) -> "FileContent":
        _check_fields(d, {"workspaceRole", "path", "bytes"})
        return cls(
            workspace_role=_check_enum(d, "workspaceRole", ROLES),
            path=_check_str(d, "path"),
            data=_b64decode(d["bytes"], "bytes"),
        )


@dataclass(frozen=True)
class FileWrite:
    """Client request to persist editor content into its own workspace."""

    kind: ClassVar[str] = "fileWrite"
    workspace_role: str
    path: str
    data: bytes

    def to_wire(self) -> dict:
        return {
            "kind": self.kind,
            "workspaceRole": self.workspace_role,
            "path": self.path,
            "bytes": _b64encode(self.data),
        }

    @classmethod
    def from_wire(cls, d: dict) -> "FileWrite":
        _check_fields(d, {"workspaceRole", "path", "bytes"})
        return cls(
            workspace_role=_check_enum(d, "workspaceRole", ROLES),
            path=_check_str(d, "path"),
            data=_b64decode(d["bytes"], "bytes"),
        )


@dataclass(frozen=True)
class TextPosition:
    path: str
    line: int
    column: int

    def to_wire(self) -> dict:
        return {"path": self.path, "line": self.line, "column": self.column}

    @classmethod
    def from_wire(cls, d) -> "TextPosition":
        _require(isinstance(d, dict), "textPosition must be an object")
        _check_fields(d, {"path", "line", "column"})
        path = _check_str(d, "path")
        line, column = d["line"], d["column"]
        _require(isinstance(line, int) and not isinstance(line, bool) and line >= 1,
                 "line must be a positive integer")
        _require(isinstance(column, int) and not isinstance(column, bool) and column >= 0,
                 "column must be a non-negative integer")
        return cls(path=path, line=line, column=column)


@dataclass(frozen=True)
class CursorMoved:
    kind: ClassVar[str] = "cursorMoved"
    component: str
    x: float
    y: float
    text_position: Optional[TextPosition] = None

    def to_wire(self) -> dict:
        d = {"kind": self.kind, "component": self.component, "x": self.x, "y": self.y}
        if self.text_position is not None:
            d["textPosition"] = self.text_position.to_wire()
        return d

    @classmethod
    def from_wire(cls, d: dict) -> "CursorMoved":
        _check_fields(d, {"component", "x", "y"}, optional={"textPosition"})
        component = _check_enum(d, "component", COMPONENTS)
        coords = []
        for axis in ("x", "y"):
            value = d[axis]
            _require(
                isinstance(value, (int, float))
                and not isinstance(value, bool)
                and math.isfinite(value)
                and 0.0 <= value <= 1.0,
                f"{axis} must be a number in [0, 1]",
            )
            coords.append(float(value))
        text_position = (
            TextPosition.from_wire(d["textPosition"]) if "textPosition" in d else None
        )
        return cls(component=component, x=coords[0], y=coords[1], text_position=text_position)


@dataclass(frozen=True)
class FocusChanged:
    kind: ClassVar[str] = "focusChanged"
    component: str

    def to_wire(self) -> dict:
        return {"kind": self.kind, "component": self.component}

    @classmethod
    def from_wire(cls, d: dict) -> "FocusChanged":
        _check_fields(d, {"component"})
        return cls(component=_check_enum(d, "component", COMPONENTS))


@dataclass(frozen=True)
class RepoState:
    kind: ClassVar[str] = "repoState"
    workspace_role: str
    scope: str
    snapshot: Optional[dict] = None
    delta: Optional[dict] = None

    def __post_init__(self):
        if (self.snapshot is None) == (self.delta is None):
            raise MalformedFrame("repoState carries exactly one of snapshot or delta")

    def to_wire(self) -> dict:
        d = {"kind": self.kind, "workspaceRole": self.workspace_role, "scope": self.scope}
        if self.snapshot is not None:
            d["snapshot"] = self.snapshot
        else:
            d["delta"] = self.delta
        return d

    @classmethod
    def from_wire(cls, d: dict) -> "RepoState":
        _check_fields(d, {"workspaceRole", "scope"}, optional={"snapshot", "delta"})
        role = _check_enum(d, "workspaceRole", ROLES)
        scope = _check_enum(d, "scope", SCOPES)
        has_snapshot, has_delta = "snapshot" in d, "delta" in d
        _require(has_snapshot != has_delta, "repoState carries exactly one of snapshot or delta")
        if has_snapshot:
            _require(isinstance(d["snapshot"], dict), "snapshot must be an object")
            _require(
                {"commits", "refs", "head", "status", "capturedAt"} <= set(d["snapshot"]),
                "snapshot is missing required keys",
            )
            return cls(workspace_role=role, scope=scope, snapshot=d["snapshot"])
        _require(isinstance(d["delta"], dict), "delta must be an object")
        _require(
            {"addedCommits", "removedCommits", "changedRefs"} <= set(d["delta"]),
            "delta is missing required keys",
        )
        return cls(workspace_role=role, scope=scope, delta=d["delta"])


@dataclass(frozen=True)
class Presence:
    kind: ClassVar[str] = "presence"
    member_id: str
    display_name: str
    avatar: str
    event: str

    def to_wire(self) -> dict:
        return {
            "kind": self.kind,
            "memberId": self.member_id,
            "displayName": self.display_name,
            "avatar": self.avatar,
            "event": self.event,
        }

    @classmethod
    def from_wire(cls, d: dict) -> "Presence":
        _check_fields(d, {"memberId", "displayName", "avatar", "event"})
        return cls(
            member_id=_check_str(d, "memberId"),
            display_name=_check_str(d, "displayName"),
            avatar=_check_str(d, "avatar"),
            event=_check_enum(d, "event", PRESENCE_EVENTS),
        )


@dataclass(frozen=True)
class TaskAdvance:
    kind: ClassVar[str] = "taskAdvance"
    task_index: int
    confirmed_by: tuple[str, ...] = ()

    def to_wire(self) -> dict:
        return {
            "kind": self.kind,
            "taskIndex": self.task_index,
            "confirmedBy": sorted(self.confirmed_by),
        }

    @classmethod
    def from_wire(cls, d: dict) -> "TaskAdvance":
        _check_fields(d, {"taskIndex", "confirmedBy"})
        idx = d["taskIndex"]
        _require(isinstance(idx, int) and not isinstance(idx, bool) and idx >= 0,
                 "taskIndex must be a non-negative integer")
        members = d["confirmedBy"]
        _require(
            isinstance(members, list) and all(isinstance(m, str) and m for m in members),
            "confirmedBy must be a list of member ids",
        )
        return cls(task_index=idx, confirmed_by=tuple(sorted(members)))


@dataclass(frozen=True)
class GradeUpdate:
    kind: ClassVar[str] = "gradeUpdate"
    report: dict = field(default_factory=dict)

    def to_wire(self) -> dict:
        return {"kind": self.kind, "report": self.report}

    @classmethod
    def from_wire(cls, d: dict) -> "GradeUpdate":
        _check_fields(d, {"report"})
        report = d["report"]
        _require(isinstance(report, dict), "report must be an object")
        _require(
            {"exerciseId", "outcomes", "performancePct"} <= set(report),
            "report is missing required keys",
        )
        return cls(report=report)


@dataclass(frozen=True)
class ErrorPayload:
    kind: ClassVar[str] = "error"
    code: str
    detail: str = ""

    def to_wire(self) -> dict:
        return {"kind": self.kind, "code": self.code, "detail": self.detail}

    @classmethod
    def from_wire(cls, d: dict) -> "ErrorPayload":
        _check_fields(d, {"code", "detail"})
        return cls(code=_check_str(d, "code"), detail=_check_str(d, "detail", allow_empty=True))


PAYLOAD_TYPES = (
    TerminalInput,
    TerminalOutput,
    FileSaved,
    FileContent,
    FileWrite,
    CursorMoved,
    FocusChanged,
    RepoState,
    Presence,
    TaskAdvance,
    GradeUpdate,
    ErrorPayload,
)

PAYLOAD_REGISTRY = {cls.kind: cls for cls in PAYLOAD_TYPES}

Payload = (
    TerminalInput
    | TerminalOutput
    | FileSaved
    | FileContent
    | FileWrite
    | CursorMoved
    | FocusChanged
    | RepoState
    | Presence
    | TaskAdvance
    | GradeUpdate
    | ErrorPayload
)
