"""Room lifecycle and event fan-out.

A room binds one exercise, a view mode, two members, and the three
workspaces. The registry serializes each room's state transitions under
one lock, assigns per-sender sequence numbers at that serialization point,
and fans envelopes out to bounded per-member queues - a slow consumer is
disconnected rather than allowed to stall its partner.
"""

from __future__ import annotations

import queue
import secrets
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from ..errors import (
    AlreadyConfirmed,
    NoMoreTasks,
    NotAMember,
    RoomDestroyed,
    RoomFinished,
    RoomFull,
    SessionClosed,
    UnknownCode,
    UnknownExercise,
    UnknownMember,
    GitDuetError,
)
from ..exercises import ExerciseSpec, GradeReport, grade_exercise, grade_task
from ..exercises.grading import RoomStateDigests
from ..repostate import RepoSnapshot, capture_state_digest, diff_snapshots, snapshot
from ..sandbox import (
    CommitIdentity,
    RoomWorkspaces,
    TerminalDims,
    WorkspaceManager,
    WorkspaceRole,
)
from ..wire import (
    SERVER_SENDER,
    CursorMoved,
    Envelope,
    ErrorPayload,
    FileContent,
    FileSaved,
    FileWrite,
    FocusChanged,
    GradeUpdate,
    Presence,
    RepoState,
    RoomMode,
    RoomView,
    TaskAdvance,
    TerminalInput,
    TerminalOutput,
    apply_read_only_guard,
    route,
)
from .codes import generate_code

REPLAY_CAPACITY = 2048
QUEUE_CAPACITY = 1024
GC_IDLE_SECONDS = 2 * 60 * 60
FILE_CONTENT_CAP = 256 * 1024

AVATARS = ("fox", "owl", "bear", "lynx", "orca", "puffin", "seal", "hare")

CHANNEL_CLOSED = object()  # sentinel pushed to wake readers on shutdown


class RoomPhase(str, Enum):
    WAITING_FOR_PEER = "waitingForPeer"
    ACTIVE = "active"
    FINISHED = "finished"
    DESTROYED = "destroyed"


@dataclass(frozen=True)
class MemberProfile:
    display_name: str
    avatar: str = "fox"


class MemberChannel:
    """Bounded delivery queue one connection drains."""

    def __init__(self, capacity: int = QUEUE_CAPACITY):
        self.queue: queue.Queue = queue.Queue(maxsize=capacity)
        self.closed = False

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        try:
            self.queue.put_nowait(CHANNEL_CLOSED)
        except queue.Full:
            pass

    def get(self, timeout: Optional[float] = None):
        """Next envelope, or None once the channel is closed."""
        try:
            item = self.queue.get(timeout=timeout)
        except queue.Empty:
            return None
        return None if item is CHANNEL_CLOSED else item


@dataclass
class Member:
    id: str
    profile: MemberProfile
    role: str  # "localA" | "localB"
    token: str
    connected: bool = False
    channel: Optional[MemberChannel] = None
    last_delivered_order: int = 0
    ever_attached: bool = False


class Room:
    def __init__(self, room_id: str, code: str, exercise: ExerciseSpec, mode: RoomMode):
        self.id = room_id
        self.code = code
        self.exercise = exercise
        self.mode = mode
        self.phase = RoomPhase.WAITING_FOR_PEER
        self.members: dict[str, Member] = {}
        self.workspaces: Optional[RoomWorkspaces] = None
        self.current_task = 1
        self.confirmations: set[str] = set()
        self.outcomes: dict[int, bool] = {}
        self.lock = threading.RLock()
        self.replay: deque = deque(maxlen=REPLAY_CAPACITY)  # (order, env, recipients)
        self.order = 0
        self.server_seq = 0
        self.client_seq: dict[str, int] = {}
        self.latest_snapshots: dict[WorkspaceRole, RepoSnapshot] = {}
        self.channels_open = True
        self.last_activity = time.time()
        self.deadline: Optional[float] = None
        self.timer_fired = False
        self.final_report: Optional[GradeReport] = None

    # --- views -----------------------------------------------------------

    def routing_view(self) -> RoomView:
        session_owners = {}
        if self.workspaces is not None:
            for role in (WorkspaceRole.LOCAL_A, WorkspaceRole.LOCAL_B):
                term = self.workspaces.terminal(role)
                if term is not None and not term.closed:
                    session_owners[term.session_id] = role.value
        return RoomView(
            mode=self.mode,
            member_roles={m.id: m.role for m in self.members.values()},
            session_owners=session_owners,
        )

    def member_by_role(self, role: str) -> Optional[Member]:
        for member in self.members.values():
            if member.role == role:
                return member
        return None

    def touch(self) -> None:
        self.last_activity = time.time()


class RoomRegistry:
    """All live rooms; every public method is thread-safe."""

    def __init__(
        self,
        manager: WorkspaceManager,
        catalog: dict[str, ExerciseSpec],
        gc_idle_seconds: float = GC_IDLE_SECONDS,
        queue_capacity: int = QUEUE_CAPACITY,
    ):
        self.manager = manager
        self.catalog = catalog
        self.gc_idle_seconds = gc_idle_seconds
        self.queue_capacity = queue_capacity
        self._rooms: dict[str, Room] = {}
        self._codes: dict[str, str] = {}  # code -> room id
        self._lock = threading.Lock()

    # --- lifecycle -------------------------------------------------------

    def create_room(
        self, exercise_id: str, mode: RoomMode, profile: MemberProfile
    ) -> tuple[Room, Member]:
        exercise = self.catalog.get(exercise_id)
        if exercise is None:
            raise UnknownExercise(f"no exercise {exercise_id!r}")
        with self._lock:
            code = generate_code()
            while code in self._codes:
                code = generate_code()
            room = Room(secrets.token_hex(8), code, exercise, mode)
            creator = Member(
                id=secrets.token_hex(8),
                profile=profile,
                role="localA",
                token=secrets.token_urlsafe(16),
            )
            room.members[creator.id] = creator
            self._rooms[room.id] = room
            self._codes[code] = room.id
        self._emit(room, Presence(
            member_id=creator.id,
            display_name=profile.display_name,
            avatar=profile.avatar,
            event="joined",
        ))
        return room, creator

    def join_room(self, code: str, profile: MemberProfile) -> tuple[Room, Member]:
        with self._lock:
            room_id = self._codes.get(code)
        if room_id is None:
            raise UnknownCode(f"no live room with code {code}")
        room = self._rooms[room_id]
        with room.lock:
            if room.phase is RoomPhase.DESTROYED:
                raise UnknownCode(f"no live room with code {code}")
            if room.phase is RoomPhase.FINISHED:
                raise RoomFinished("this room has finished its exercise")
            if len(room.members) >= 2:
                raise RoomFull("both seats are taken")
            joiner = Member(
                id=secrets.token_hex(8),
                profile=profile,
                role="localB",
                token=secrets.token_urlsafe(16),
            )
            room.members[joiner.id] = joiner
            try:
                self._activate(room)
            except Exception:
                del room.members[joiner.id]
                raise
            room.touch()
        return room, joiner

    def _activate(self, room: Room) -> None:
        """Provision workspaces, open terminals, publish the starting state."""
        workspaces = self.manager.provision_room(room.exercise.setup, room_id=room.id)
        room.workspaces = workspaces
        workspaces.events.terminal_output = lambda role, sid, data: self._on_terminal_output(
            room, role, sid, data
        )
        workspaces.events.terminal_quiescence = lambda role: self._on_quiescence(room, role)
        workspaces.events.terminal_closed = lambda role, sid: self._on_terminal_closed(
            room, role, sid
        )
        workspaces.events.file_saved = lambda role, path, digest: self._on_file_saved(
            room, role, path, digest
        )
        for role in (WorkspaceRole.LOCAL_A, WorkspaceRole.LOCAL_B):
            member = room.member_by_role(role.value)
            identity = CommitIdentity(
                name=member.profile.display_name if member else "Learner",
                email=f"{role.value.lower()}@gitduet.local",
            )
            workspaces.open_terminal(role, TerminalDims(), identity=identity)
        room.phase = RoomPhase.ACTIVE
        if room.exercise.time_limit_minutes:
            room.deadline = time.time() + room.exercise.time_limit_minutes * 60

        joiner = room.member_by_role("localB")
        if joiner is not None:
            self._emit(room, Presence(
                member_id=joiner.id,
                display_name=joiner.profile.display_name,
                avatar=joiner.profile.avatar,
                event="joined",
            ))
        for role in WorkspaceRole:
            self._publish_repo_state(room, role, full=True)

    def destroy_room(self, room_id: str) -> None:
        room = self._rooms.get(room_id)
        if room is None:
            return
        with room.lock:
            if room.phase is RoomPhase.DESTROYED:
                return
            room.phase = RoomPhase.DESTROYED
            workspaces = room.workspaces
        # terminal close events flush to members before directories vanish
        if workspaces is not None:
            self.manager.destroy_room(workspaces)
        with room.lock:
            room.channels_open = False
            for member in room.members.values():
                if member.channel is not None:
                    member.channel.close()
                member.connected = False
        with self._lock:
            self._codes.pop(room.code, None)

    def reset_room(self, room_id: str) -> None:
        room = self._require_room(room_id)
        with room.lock:
            if room.phase is RoomPhase.DESTROYED or room.workspaces is None:
                raise RoomDestroyed("cannot reset a destroyed room")
            self.manager.reset_room(room.workspaces, room.exercise.setup)
            for role in (WorkspaceRole.LOCAL_A, WorkspaceRole.LOCAL_B):
                member = room.member_by_role(role.value)
                identity = CommitIdentity(
                    name=member.profile.display_name if member else "Learner",
                    email=f"{role.value.lower()}@gitduet.local",
                )
                room.workspaces.open_terminal(role, TerminalDims(), identity=identity)
            room.latest_snapshots.clear()
            for role in WorkspaceRole:
                self._publish_repo_state(room, role, full=True)
            room.touch()

    def collect_idle(self, now: Optional[float] = None) -> list[str]:
        now = now if now is not None else time.time()
        stale = [
            room.id
            for room in list(self._rooms.values())
            if room.phase is not RoomPhase.DESTROYED
            and now - room.last_activity > self.gc_idle_seconds
        ]
        for room_id in stale:
            self.destroy_room(room_id)
        return stale

    def check_timers(self, now: Optional[float] = None) -> None:
        now = now if now is not None else time.time()
        for room in list(self._rooms.values()):
            with room.lock:
                if (
                    room.phase is RoomPhase.ACTIVE
                    and room.deadline is not None
                    and not room.timer_fired
                    and now >= room.deadline
                ):
                    room.timer_fired = True
                    self._emit(room, ErrorPayload(
                        code="TIMER_EXPIRED",
                        detail=f"the {room.exercise.time_limit_minutes} minute limit has passed",
                    ))

    # --- connections -------------------------------------------------------

    def attach(
        self, room_id: str, member_id: str, token: Optional[str] = None
    ) -> tuple[MemberChannel, list[Envelope]]:
        """Connect a member; returns their channel and the replay backlog."""
        room = self._require_room(room_id)
        with room.lock:
            if room.phase is RoomPhase.DESTROYED:
                raise RoomDestroyed(f"room {room_id} is destroyed")
            member = room.members.get(member_id)
            if member is None:
                raise UnknownMember(f"{member_id} never joined this room")
            if token is not None and token != member.token:
                raise UnknownMember("bad member token")
            reconnecting = member.ever_attached
            if member.channel is not None:
                member.channel.close()
            member.channel = MemberChannel(self.queue_capacity)
            member.connected = True
            member.ever_attached = True

            replay: list[Envelope] = []
            if reconnecting and room.workspaces is not None and room.phase is not RoomPhase.DESTROYED:
                # fresh full snapshots first, then anything missed, in order
                for role in WorkspaceRole:
                    snap = room.latest_snapshots.get(role)
                    if snap is None:
                        continue
                    payload = RepoState(
                        workspace_role=role.value,
                        scope="remote" if role is WorkspaceRole.REMOTE else "local",
                        snapshot=snap.to_wire(),
                    )
                    replay.append(self._bare_envelope(room, payload))
            for order, envelope, recipients in list(room.replay):
                if order > member.last_delivered_order and member_id in recipients:
                    replay.append(envelope)
                    member.last_delivered_order = order
            room.touch()
            if reconnecting:
                self._emit(room, Presence(
                    member_id=member.id,
                    display_name=member.profile.display_name,
                    avatar=member.profile.avatar,
                    event="reconnected",
                ))
            return member.channel, replay

    def detach(self, room_id: str, member_id: str) -> None:
        room = self._rooms.get(room_id)
        if room is None:
            return
        with room.lock:
            member = room.members.get(member_id)
            if member is None or not member.connected:
                return
            member.connected = False
            if member.channel is not None:
                member.channel.close()
                member.channel = None
            if room.phase in (RoomPhase.ACTIVE, RoomPhase.WAITING_FOR_PEER):
                self._emit(room, Presence(
                    member_id=member.id,
                    display_name=member.profile.display_name,
                    avatar=member.profile.avatar,
                    event="left",
                ))

    # --- client ingest ----------------------------------------------------

    def ingest(self, room_id: str, member_id: str, envelope: Envelope) -> None:
        """Apply one client envelope: validate, guard, effect, fan out."""
        room = self._require_room(room_id)
        with room.lock:
            if room.phase is RoomPhase.DESTROYED:
                raise RoomDestroyed(f"room {room_id} is destroyed")
            if member_id not in room.members:
                raise NotAMember(f"{member_id} is not a member")
            if envelope.sender_id != member_id:
                self._error_to(room, member_id, "SENDER_MISMATCH",
                               "senderId must match the connected member")
                return
            last = room.client_seq.get(member_id, -1)
            if envelope.seq <= last:
                self._error_to(room, member_id, "STALE_SEQ",
                               f"seq {envelope.seq} is not above {last}")
                return
            room.client_seq[member_id] = envelope.seq
            room.touch()

            decision = apply_read_only_guard(envelope, room.routing_view())
            if not decision.accepted:
                self._error_to(room, member_id, decision.error_code or "REJECTED",
                               decision.detail)
                return

            payload = envelope.payload
            if isinstance(payload, TerminalInput):
                self._apply_terminal_input(room, member_id, payload)
            elif isinstance(payload, FileWrite):
                self._apply_file_write(room, member_id, payload)
            elif isinstance(payload, TaskAdvance):
                try:
                    self.confirm_task(room_id, member_id)
                except GitDuetError as exc:
                    self._error_to(room, member_id, exc.code, exc.message)
            else:
                # peer awareness (cursor, focus): forwarded untouched
                recipients = route(envelope, room.routing_view())
                self._fan_out(room, envelope, recipients)

    def _apply_terminal_input(self, room: Room, member_id: str, payload: TerminalInput) -> None:
        found = room.workspaces.terminal_by_session(payload.session_id) if room.workspaces else None
        if found is None:
            self._error_to(room, member_id, "UNKNOWN_SESSION", "no such terminal session")
            return
        _, term = found
        try:
            term.write(payload.data)
        except SessionClosed as exc:
            self._error_to(room, member_id, exc.code, exc.message)

    def _apply_file_write(self, room: Room, member_id: str, payload: FileWrite) -> None:
        try:
            room.workspaces.write_file(
                WorkspaceRole(payload.workspace_role), payload.path, payload.data
            )
        except GitDuetError as exc:
            self._error_to(room, member_id, exc.code, exc.message)

    # --- task progression ----------------------------------------------------

    def confirm_task(self, room_id: str, member_id: str) -> None:
        room = self._require_room(room_id)
        with room.lock:
            if room.phase is RoomPhase.DESTROYED:
                raise RoomDestroyed(f"room {room_id} is destroyed")
            member = room.members.get(member_id)
            if member is None:
                raise UnknownMember(f"{member_id} is not a member")
            if room.phase is RoomPhase.FINISHED:
                raise NoMoreTasks("the exercise is complete")
            if room.phase is not RoomPhase.ACTIVE:
                raise NoMoreTasks("the room is not active yet")
            if member_id in room.confirmations:
                raise AlreadyConfirmed(f"{member.profile.display_name} already confirmed")
            room.confirmations.add(member_id)
            room.touch()

            if len(room.confirmations) < len(room.members) or len(room.members) < 2:
                self._emit(room, TaskAdvance(
                    task_index=room.current_task,
                    confirmed_by=tuple(sorted(room.confirmations)),
                ))
                return

            finished_task = room.current_task
            self._record_task_grade(room, finished_task)
            room.confirmations.clear()
            if finished_task >= room.exercise.task_count():
                room.phase = RoomPhase.FINISHED
                room.final_report = grade_exercise(room.exercise, room.outcomes)
                self._emit(room, GradeUpdate(report=room.final_report.to_wire()))
            else:
                room.current_task = finished_task + 1
                self._emit(room, TaskAdvance(task_index=room.current_task, confirmed_by=()))

    def _record_task_grade(self, room: Room, task_index: int) -> None:
        task = room.exercise.task(task_index)
        if not task.graded:
            return
        ws = room.workspaces
        states = RoomStateDigests(
            local_a=capture_state_digest(ws.local_a.root),
            local_b=capture_state_digest(ws.local_b.root),
            remote=capture_state_digest(ws.remote.root),
        )
        room.outcomes[task_index] = grade_task(
            task, states.local_a, states.local_b, states.remote
        )

    # --- workspace event adapters ---------------------------------------------

    def _on_terminal_output(self, room: Room, role: WorkspaceRole, session_id: str, data: bytes) -> None:
        with room.lock:
            if not room.channels_open:
                return
            self._emit(room, TerminalOutput(
                session_id=session_id, workspace_role=role.value, data=data
            ))

    def _on_quiescence(self, room: Room, role: WorkspaceRole) -> None:
        # a settled command may have touched the local repo and, via
        # push/fetch, the shared remote
        self.refresh_repo_state(room, (role, WorkspaceRole.REMOTE))

    def _on_terminal_closed(self, room: Room, role: WorkspaceRole, session_id: str) -> None:
        with room.lock:
            if not room.channels_open:
                return
            owner = room.member_by_role(role.value)
            if owner is not None:
                self._error_to(room, owner.id, "SESSION_CLOSED",
                               f"terminal on {role.value} closed")

    def _on_file_saved(self, room: Room, role: WorkspaceRole, path: str, digest: str) -> None:
        with room.lock:
            if not room.channels_open:
                return
            self._emit(room, FileSaved(
                workspace_role=role.value, path=path, new_content_digest=digest
            ))
            try:
                data = room.workspaces.read_file(role, path)
            except GitDuetError:
                data = None
            if data is not None and len(data) <= FILE_CONTENT_CAP:
                self._emit(room, FileContent(
                    workspace_role=role.value, path=path, data=data
                ))
        self.refresh_repo_state(room, (role,))

    def refresh_repo_state(self, room: Room, roles) -> None:
        """Re-extract the given repos; broadcast deltas for any that moved."""
        with room.lock:
            if room.phase is RoomPhase.DESTROYED or room.workspaces is None:
                return
            for role in roles:
                self._publish_repo_state(room, role, full=False)

    def _publish_repo_state(self, room: Room, role: WorkspaceRole, full: bool) -> None:
        ws = room.workspaces.workspace(role)
        with room.workspaces.lock_for(role):
            if ws.state.value != "ready":
                return
            snap = snapshot(ws.root)
        previous = room.latest_snapshots.get(role)
        scope = "remote" if role is WorkspaceRole.REMOTE else "local"
        if full or previous is None:
            room.latest_snapshots[role] = snap
            self._emit(room, RepoState(
                workspace_role=role.value, scope=scope, snapshot=snap.to_wire()
            ))
            return
        delta = diff_snapshots(previous, snap)
        if delta.is_empty():
            return
        room.latest_snapshots[role] = snap
        self._emit(room, RepoState(
            workspace_role=role.value, scope=scope, delta=delta.to_wire()
        ))

    # --- fan-out core -----------------------------------------------------------

    def _bare_envelope(self, room: Room, payload) -> Envelope:
        room.server_seq += 1
        return Envelope(
            seq=room.server_seq,
            room_id=room.id,
            sender_id=SERVER_SENDER,
            sent_at=time.time(),
            payload=payload,
        )

    def _emit(self, room: Room, payload, only: Optional[frozenset[str]] = None) -> None:
        with room.lock:
            if not room.channels_open:
                return
            envelope = self._bare_envelope(room, payload)
            recipients = only if only is not None else route(envelope, room.routing_view())
            self._fan_out(room, envelope, recipients)

    def _error_to(self, room: Room, member_id: str, code: str, detail: str) -> None:
        self._emit(room, ErrorPayload(code=code, detail=detail or code),
                   only=frozenset({member_id}))

    def report_protocol_error(self, room_id: str, member_id: str, code: str, detail: str) -> None:
        """Surface a channel-level problem (bad frame, wrong room) to one member."""
        room = self._rooms.get(room_id)
        if room is None:
            return
        with room.lock:
            if member_id in room.members:
                self._error_to(room, member_id, code, detail)

    def _fan_out(self, room: Room, envelope: Envelope, recipients) -> None:
        room.order += 1
        room.replay.append((room.order, envelope, frozenset(recipients)))
        for member_id in recipients:
            member = room.members.get(member_id)
            if member is None or not member.connected or member.channel is None:
                continue
            try:
                member.channel.queue.put_nowait(envelope)
                member.last_delivered_order = room.order
            except queue.Full:
                # slow consumer: cut it loose rather than stall the room
                member.connected = False
                member.channel.close()
                member.channel = None

    # --- lookups -----------------------------------------------------------------

    def _require_room(self, room_id: str) -> Room:
        room = self._rooms.get(room_id)
        if room is None:
            raise RoomDestroyed(f"no room {room_id}")
        return room

    def get_room(self, room_id: str) -> Room:
        return self._require_room(room_id)

    def room_by_code(self, code: str) -> Optional[Room]:
        with self._lock:
            room_id = self._codes.get(code)
        return self._rooms.get(room_id) if room_id else None

    def live_rooms(self) -> list[Room]:
        return [r for r in self._rooms.values() if r.phase is not RoomPhase.DESTROYED]
