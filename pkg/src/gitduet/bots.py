"""Scripted protocol-level clients.

A bot attaches to a room exactly like a browser client: it drains the same
envelope channel, tracks repository state from full snapshots plus deltas,
and sends the same client payload kinds. Scripts are line-oriented with
three verbs plus a synchronization wait:

    TYPE <text>                 send <text> plus newline to the own terminal
    WRITE_FILE <path> <<MARK    write the following lines (until MARK) as
    ...                         the file's full content, newline-terminated
    MARK
    CONFIRM                     confirm the current task; blocks until the
                                room advances or finishes
    WAIT_FOR_REPO_STATE <repo> has_branch <name>
    WAIT_FOR_REPO_STATE <repo> branch <name> commits>=<n>
                                block until the tracked state of <repo>
                                (own | peer | remote) satisfies the predicate

Blank lines and `#` comments are ignored. The deterministic sync points
stand in for the verbal coordination human pairs provide.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import GitDuetError
from .repostate import RepoSnapshot, SnapshotDelta, apply_delta
from .rooms import MemberChannel, MemberProfile, Room, RoomRegistry
from .wire import (
    Envelope,
    ErrorPayload,
    FileWrite,
    GradeUpdate,
    Presence,
    RepoState,
    RoomMode,
    TaskAdvance,
    TerminalInput,
    TerminalOutput,
)


class BotTimeout(GitDuetError):
    code = "BOT_STEP_TIMEOUT"


@dataclass(frozen=True)
class ScriptStep:
    verb: str  # TYPE | WRITE_FILE | CONFIRM | WAIT_FOR_REPO_STATE
    text: str = ""
    path: str = ""
    content: bytes = b""
    repo: str = ""
    predicate: str = ""
    branch: str = ""
    count: int = 0
    line_no: int = 0


def parse_script(text: str) -> list[ScriptStep]:
    steps: list[ScriptStep] = []
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        raw = lines[i]
        line_no = i + 1
        i += 1
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        verb, _, rest = line.partition(" ")
        if verb == "TYPE":
            steps.append(ScriptStep(verb="TYPE", text=rest, line_no=line_no))
        elif verb == "CONFIRM":
            steps.append(ScriptStep(verb="CONFIRM", line_no=line_no))
        elif verb == "WRITE_FILE":
            path, _, marker = rest.partition("<<")
            path, marker = path.strip(), marker.strip()
            if not path or not marker:
                raise ValueError(f"line {line_no}: WRITE_FILE needs `<path> <<MARKER`")
            body: list[str] = []
            while i < len(lines):
                if lines[i].strip() == marker:
                    break
                body.append(lines[i])
                i += 1
            else:
                raise ValueError(f"line {line_no}: unterminated WRITE_FILE block")
            i += 1  # swallow the marker line
            content = ("\n".join(body) + "\n").encode() if body else b""
            steps.append(
                ScriptStep(verb="WRITE_FILE", path=path, content=content, line_no=line_no)
            )
        elif verb == "WAIT_FOR_REPO_STATE":
            parts = rest.split()
            if len(parts) >= 2 and parts[1] == "has_branch" and len(parts) == 3:
                steps.append(ScriptStep(
                    verb="WAIT_FOR_REPO_STATE", repo=parts[0],
                    predicate="has_branch", branch=parts[2], line_no=line_no,
                ))
            elif (
                len(parts) == 4
                and parts[1] == "branch"
                and parts[3].startswith("commits>=")
            ):
                steps.append(ScriptStep(
                    verb="WAIT_FOR_REPO_STATE", repo=parts[0],
                    predicate="commits_at_least", branch=parts[2],
                    count=int(parts[3][len("commits>="):]), line_no=line_no,
                ))
            else:
                raise ValueError(f"line {line_no}: bad WAIT_FOR_REPO_STATE predicate")
        else:
            raise ValueError(f"line {line_no}: unknown verb {verb!r}")
    return steps


class RoomClient:
    """One member's live connection plus its tracked view of the room."""

    def __init__(self, registry: RoomRegistry, room: Room, member_id: str, token: str):
        self.registry = registry
        self.room = room
        self.member_id = member_id
        self.token = token
        member = room.members[member_id]
        self.role = member.role
        self._seq = 0
        self._cond = threading.Condition()
        self.transcript: list[Envelope] = []
        self.terminal_text: dict[str, list[bytes]] = {}
        self.snapshots: dict[str, RepoSnapshot] = {}  # workspaceRole -> latest
        self.task_index = 1
        self.grade_report: Optional[dict] = None
        self.errors: list[ErrorPayload] = []
        self.session_ids: dict[str, str] = {}  # workspaceRole -> terminal session
        self._channel: Optional[MemberChannel] = None
        self._reader: Optional[threading.Thread] = None
        self.closed = False

    # --- connection ------------------------------------------------------

    def connect(self) -> None:
        channel, replay = self.registry.attach(self.room.id, self.member_id, self.token)
        self._channel = channel
        for envelope in replay:
            self._absorb(envelope)
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def disconnect(self) -> None:
        self.registry.detach(self.room.id, self.member_id)
        if self._reader is not None:
            self._reader.join(timeout=5)
            self._reader = None
        self._channel = None

    def _read_loop(self) -> None:
        channel = self._channel
        while channel is not None and not channel.closed:
            envelope = channel.get(timeout=0.2)
            if envelope is None:
                if channel.closed:
                    break
                continue
            self._absorb(envelope)
        with self._cond:
            self.closed = True
            self._cond.notify_all()

    def _absorb(self, envelope: Envelope) -> None:
        with self._cond:
            self.transcript.append(envelope)
            payload = envelope.payload
            if isinstance(payload, TerminalOutput):
                self.terminal_text.setdefault(payload.workspace_role, []).append(payload.data)
                self.session_ids[payload.workspace_role] = payload.session_id
            elif isinstance(payload, RepoState):
                if payload.snapshot is not None:
                    self.snapshots[payload.workspace_role] = RepoSnapshot.from_wire(payload.snapshot)
                else:
                    base = self.snapshots.get(payload.workspace_role)
                    if base is not None:
                        self.snapshots[payload.workspace_role] = apply_delta(
                            base, SnapshotDelta.from_wire(payload.delta)
                        )
            elif isinstance(payload, TaskAdvance):
                self.task_index = max(self.task_index, payload.task_index)
            elif isinstance(payload, GradeUpdate):
                self.grade_report = payload.report
            elif isinstance(payload, ErrorPayload):
                self.errors.append(payload)
            self._cond.notify_all()

    # --- sending -----------------------------------------------------------

    def send(self, payload) -> None:
        self._seq += 1
        envelope = Envelope(
            seq=self._seq,
            room_id=self.room.id,
            sender_id=self.member_id,
            sent_at=time.time(),
            payload=payload,
        )
        self.registry.ingest(self.room.id, self.member_id, envelope)

    def type_line(self, text: str, timeout: float = 30.0) -> None:
        session = self.wait_for(
            lambda: self.session_ids.get(self.role), timeout, f"terminal session for {self.role}"
        )
        self.send(TerminalInput(session_id=session, data=text.encode() + b"\n"))

    def write_file(self, path: str, content: bytes) -> None:
        self.send(FileWrite(workspace_role=self.role, path=path, data=content))

    def confirm_task(self, timeout: float = 30.0) -> None:
        at = self.task_index
        self.send(TaskAdvance(task_index=at, confirmed_by=(self.member_id,)))
        self.wait_for(
            lambda: self.task_index > at or self.grade_report is not None,
            timeout,
            f"task {at} to complete",
        )

    # --- waiting -------------------------------------------------------------

    def wait_for(self, probe, timeout: float, what: str):
        deadline = time.monotonic() + timeout
        with self._cond:
            while True:
                value = probe()
                if value:
                    return value
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise BotTimeout(f"{self.member_id} timed out waiting for {what}")
                self._cond.wait(min(remaining, 0.25))

    def repo_role(self, repo: str) -> str:
        if repo == "own":
            return self.role
        if repo == "peer":
            return "localB" if self.role == "localA" else "localA"
        if repo == "remote":
            return "remote"
        return repo

    def wait_repo_state(self, step: ScriptStep, timeout: float) -> None:
        role = self.repo_role(step.repo)

        def probe():
            snap = self.snapshots.get(role)
            if snap is None:
                return False
            branches = snap.local_branches()
            if step.predicate == "has_branch":
                return step.branch in branches
            tip = branches.get(step.branch)
            if tip is None:
                return False
            return len(snap.reachable_from(tip)) >= step.count

        self.wait_for(
            probe, timeout,
            f"{step.repo} {step.predicate} {step.branch} {step.count or ''}".strip(),
        )

    def terminal_transcript(self, role: Optional[str] = None) -> str:
        with self._cond:
            chunks = self.terminal_text.get(role or self.role, [])
            return b"".join(chunks).decode("utf-8", "replace")

    def run_script(self, steps: list[ScriptStep], step_timeout: float = 30.0) -> None:
        for step in steps:
            if step.verb == "TYPE":
                self.type_line(step.text, timeout=step_timeout)
            elif step.verb == "WRITE_FILE":
                self.write_file(step.path, step.content)
            elif step.verb == "CONFIRM":
                self.confirm_task(timeout=step_timeout)
            elif step.verb == "WAIT_FOR_REPO_STATE":
                self.wait_repo_state(step, timeout=step_timeout)


@dataclass
class BotRunResult:
    report: Optional[dict]
    outcomes: dict[int, bool]
    client_a: RoomClient
    client_b: RoomClient
    room: Room


def run_bot_pair(
    registry: RoomRegistry,
    exercise_id: str,
    script_a: str,
    script_b: str,
    mode: RoomMode = RoomMode.SPLIT,
    step_timeout: float = 30.0,
    profiles: Optional[tuple[MemberProfile, MemberProfile]] = None,
) -> BotRunResult:
    """Drive two scripted clients through a full room lifecycle."""
    steps_a = parse_script(script_a)
    steps_b = parse_script(script_b)
    profile_a, profile_b = profiles or (
        MemberProfile(display_name="Bot A", avatar="fox"),
        MemberProfile(display_name="Bot B", avatar="owl"),
    )
    room, member_a = registry.create_room(exercise_id, mode, profile_a)
    _, member_b = registry.join_room(room.code, profile_b)

    client_a = RoomClient(registry, room, member_a.id, member_a.token)
    client_b = RoomClient(registry, room, member_b.id, member_b.token)
    client_a.connect()
    client_b.connect()

    failures: list[BaseException] = []

    def runner(client: RoomClient, steps: list[ScriptStep]):
        try:
            client.run_script(steps, step_timeout=step_timeout)
        except BaseException as exc:  # surfaced to the caller below
            failures.append(exc)

    thread_a = threading.Thread(target=runner, args=(client_a, steps_a), daemon=True)
    thread_b = threading.Thread(target=runner, args=(client_b, steps_b), daemon=True)
    thread_a.start()
    thread_b.start()
    budget = step_timeout * (len(steps_a) + len(steps_b) + 4)
    thread_a.join(timeout=budget)
    thread_b.join(timeout=budget)
    if thread_a.is_alive() or thread_b.is_alive():
        failures.append(BotTimeout("bot scripts did not finish within budget"))
    if failures:
        raise failures[0]

    return BotRunResult(
        report=room.final_report.to_wire() if room.final_report else None,
        outcomes=dict(room.outcomes),
        client_a=client_a,
        client_b=client_b,
        room=room,
    )
