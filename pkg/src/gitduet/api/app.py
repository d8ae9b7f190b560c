"""FastAPI application wrapping the room registry.

HTTP handlers are stateless: everything they need lives in the registry,
the exercise catalog, and the doc index, so the HTTP layer can be killed
and restarted without losing any session state. The stream endpoint hands
each connection to the registry's per-room serialization.
"""

from __future__ import annotations

import asyncio
from typing import Optional

from fastapi import Depends, FastAPI, Query, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, Response

from ..errors import (
    GitDuetError,
    MalformedFrame,
    NotAMember,
    OversizeFrame,
    PathEscape,
    UnknownMember,
    UnknownVariant,
)
from ..exercises import ExerciseSpec
from ..reference import DocIndex
from ..rooms import MemberProfile, Room, RoomPhase, RoomRegistry
from ..sandbox import WorkspaceRole
from ..wire import RoomMode, decode, encode
from .errormap import status_for
from .models import (
    ApiErrorBody,
    CreateRoomRequest,
    CreateRoomResponse,
    ExerciseSummary,
    JoinRoomRequest,
    JoinRoomResponse,
    MemberInfo,
    RoomStateResponse,
    SearchResponse,
    SearchResult,
    TaskInfo,
)


def create_app(registry: RoomRegistry, doc_index: DocIndex) -> FastAPI:
    app = FastAPI(title="gitduet", version="0.1.0")
    app.state.registry = registry
    app.state.doc_index = doc_index

    @app.exception_handler(GitDuetError)
    async def domain_error(request: Request, exc: GitDuetError):
        return JSONResponse(
            status_code=status_for(exc),
            content=ApiErrorBody(code=exc.code, message=exc.message).model_dump(),
        )

    def require_member(room: Room, member_id: str, token: Optional[str]):
        member = room.members.get(member_id)
        if member is None or (token is not None and token != member.token):
            raise UnknownMember("unknown member or bad token")
        return member

    # --- room lifecycle -----------------------------------------------

    @app.post("/rooms", response_model=CreateRoomResponse)
    async def create_room(body: CreateRoomRequest):
        profile = MemberProfile(body.profile.displayName, body.profile.pick_avatar())
        room, member = await asyncio.to_thread(
            registry.create_room, body.exerciseId, RoomMode(body.mode), profile
        )
        return CreateRoomResponse(
            roomId=room.id,
            invitationCode=room.code,
            memberId=member.id,
            role=member.role,
            token=member.token,
        )

    @app.post("/rooms/join", response_model=JoinRoomResponse)
    async def join_room(body: JoinRoomRequest):
        profile = MemberProfile(body.profile.displayName, body.profile.pick_avatar())
        room, member = await asyncio.to_thread(
            registry.join_room, body.code.strip().upper(), profile
        )
        return JoinRoomResponse(
            roomId=room.id, memberId=member.id, role=member.role, token=member.token
        )

    @app.get("/exercises", response_model=list[ExerciseSummary])
    async def list_exercises():
        return [
            ExerciseSummary(
                id=spec.id,
                title=spec.title,
                taskCount=spec.task_count(),
                timeLimitMinutes=spec.time_limit_minutes,
            )
            for spec in sorted(registry.catalog.values(), key=lambda s: s.id)
        ]

    @app.get("/rooms/{room_id}/state", response_model=RoomStateResponse)
    async def room_state(room_id: str, memberId: str, token: Optional[str] = None):
        room = registry.get_room(room_id)
        member = require_member(room, memberId, token)
        spec: ExerciseSpec = room.exercise
        task = None
        if 1 <= room.current_task <= spec.task_count():
            t = spec.task(room.current_task)
            task = TaskInfo(
                index=t.index,
                graded=t.graded,
                description=t.description_a if member.role == "localA" else t.description_b,
            )
        session_id = None
        if room.workspaces is not None:
            term = room.workspaces.terminal(WorkspaceRole(member.role))
            if term is not None and not term.closed:
                session_id = term.session_id
        return RoomStateResponse(
            roomId=room.id,
            exerciseId=spec.id,
            mode=room.mode.value,
            phase=room.phase.value,
            currentTask=room.current_task,
            taskCount=spec.task_count(),
            members=[
                MemberInfo(
                    memberId=m.id,
                    displayName=m.profile.display_name,
                    avatar=m.profile.avatar,
                    role=m.role,
                    connected=m.connected,
                )
                for m in room.members.values()
            ],
            you=MemberInfo(
                memberId=member.id,
                displayName=member.profile.display_name,
                avatar=member.profile.avatar,
                role=member.role,
                connected=member.connected,
            ),
            narrative=spec.narrative_a if member.role == "localA" else spec.narrative_b,
            task=task,
            sessionId=session_id,
            gradeReport=room.final_report.to_wire() if room.final_report else None,
        )

    @app.get("/rooms/{room_id}/files/{role}/{path:path}")
    async def fetch_file(
        room_id: str, role: str, path: str, memberId: str, token: Optional[str] = None
    ):
        room = registry.get_room(room_id)
        member = require_member(room, memberId, token)
        if role not in ("localA", "localB"):
            raise PathEscape("files are only served from learner workspaces")
        if role != member.role and room.mode is not RoomMode.SPLIT:
            # regular mode: the peer's workspace is invisible
            raise NotAMember("peer files are not visible in regular mode")
        if room.workspaces is None:
            raise UnknownMember("the room has no workspaces yet")
        data = await asyncio.to_thread(
            room.workspaces.read_file, WorkspaceRole(role), path
        )
        return Response(content=data, media_type="application/octet-stream")

    @app.post("/rooms/{room_id}/reset")
    async def reset_room(room_id: str, memberId: str, token: Optional[str] = None):
        room = registry.get_room(room_id)
        require_member(room, memberId, token)
        await asyncio.to_thread(registry.reset_room, room_id)
        return {"ok": True}

    # --- reference manual ---------------------------------------------------

    @app.get("/reference/search", response_model=SearchResponse)
    async def search(q: str = Query(default="")):
        if not q.strip():
            return JSONResponse(
                status_code=400,
                content=ApiErrorBody(code="EMPTY_QUERY", message="query must not be empty").model_dump(),
            )
        hits = doc_index.search(q)
        return SearchResponse(
            query=q,
            results=[
                SearchResult(
                    commandName=p.command_name,
                    title=p.title,
                    summary=next((b for h, b in p.sections if h == "Summary"), ""),
                )
                for p in hits
            ],
        )

    @app.get("/reference/page/{command}")
    async def reference_page(command: str):
        page = doc_index.page(command)
        if page is None:
            return JSONResponse(
                status_code=404,
                content=ApiErrorBody(code="NOT_FOUND", message=f"no page for {command}").model_dump(),
            )
        return page.to_wire()

    # --- the awareness stream ----------------------------------------------------

    @app.websocket("/rooms/{room_id}/stream")
    async def stream(websocket: WebSocket, room_id: str, memberId: str, token: str = ""):
        await websocket.accept()
        try:
            channel, replay = await asyncio.to_thread(
                registry.attach, room_id, memberId, token or None
            )
        except GitDuetError as exc:
            await websocket.close(code=4000, reason=exc.code)
            return

        async def pump_out():
            for envelope in replay:
                await websocket.send_text(encode(envelope).decode())
            while True:
                envelope = await asyncio.to_thread(channel.get, 0.5)
                if envelope is None:
                    if channel.closed:
                        return
                    continue
                await websocket.send_text(encode(envelope).decode())

        async def pump_in():
            while True:
                text = await websocket.receive_text()
                try:
                    envelope = decode(text)
                except (MalformedFrame, UnknownVariant, OversizeFrame) as exc:
                    await asyncio.to_thread(
                        registry.report_protocol_error, room_id, memberId, exc.code, exc.message
                    )
                    continue
                if envelope.room_id != room_id:
                    await asyncio.to_thread(
                        registry.report_protocol_error, room_id, memberId,
                        "ROOM_MISMATCH", "envelope roomId does not match this stream",
                    )
                    continue
                try:
                    await asyncio.to_thread(registry.ingest, room_id, memberId, envelope)
                except (NotAMember, GitDuetError):
                    return

        tasks = [asyncio.create_task(pump_out()), asyncio.create_task(pump_in())]
        try:
            done, pending = await asyncio.wait(tasks, return_when=asyncio.FIRST_COMPLETED)
            for task in pending:
                task.cancel()
        except WebSocketDisconnect:
            pass
        finally:
            for task in tasks:
                task.cancel()
            await asyncio.to_thread(registry.detach, room_id, memberId)

    return app
