"""Room pairing, presence, replay, and task progression."""

from .codes import CODE_ALPHABET, CODE_LENGTH, generate_code, is_valid_code
from .room import (
    AVATARS,
    GC_IDLE_SECONDS,
    QUEUE_CAPACITY,
    REPLAY_CAPACITY,
    Member,
    MemberChannel,
    MemberProfile,
    Room,
    RoomPhase,
    RoomRegistry,
)

__all__ = [
    "AVATARS",
    "CODE_ALPHABET",
    "CODE_LENGTH",
    "GC_IDLE_SECONDS",
    "Member",
    "MemberChannel",
    "MemberProfile",
    "QUEUE_CAPACITY",
    "REPLAY_CAPACITY",
    "Room",
    "RoomPhase",
    "RoomRegistry",
    "generate_code",
    "is_valid_code",
]
