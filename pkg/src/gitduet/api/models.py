"""Request and response bodies for the HTTP surface."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..rooms import AVATARS


class Profile(BaseModel):
    displayName: str = Field(min_length=1, max_length=64)
    avatar: str = "fox"

    def pick_avatar(self) -> str:
        return self.avatar if self.avatar in AVATARS else "fox"


class CreateRoomRequest(BaseModel):
    exerciseId: str
    mode: Literal["split", "regular"]
    profile: Profile


class CreateRoomResponse(BaseModel):
    roomId: str
    invitationCode: str
    memberId: str
    role: str
    token: str


class JoinRoomRequest(BaseModel):
    code: str
    profile: Profile


class JoinRoomResponse(BaseModel):
    roomId: str
    memberId: str
    role: str
    token: str


class ExerciseSummary(BaseModel):
    id: str
    title: str
    taskCount: int
    timeLimitMinutes: Optional[int] = None


class MemberInfo(BaseModel):
    memberId: str
    displayName: str
    avatar: str
    role: str
    connected: bool


class TaskInfo(BaseModel):
    index: int
    graded: bool
    description: str


class RoomStateResponse(BaseModel):
    roomId: str
    exerciseId: str
    mode: str
    phase: str
    currentTask: int
    taskCount: int
    members: list[MemberInfo]
    you: MemberInfo
    narrative: str
    task: Optional[TaskInfo] = None
    sessionId: Optional[str] = None
    gradeReport: Optional[dict] = None


class SearchResult(BaseModel):
    commandName: str
    title: str
    summary: str


class SearchResponse(BaseModel):
    query: str
    results: list[SearchResult]


class ApiErrorBody(BaseModel):
    code: str
    message: str
