"""Envelope framing: canonical JSON, strict validation, hard size cap.

Frames are UTF-8 JSON documents, one per channel message. `decode` is
total over arbitrary byte strings up to the cap: it either returns an
envelope or raises one of MalformedFrame / UnknownVariant / OversizeFrame,
never anything else.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from ..errors import MalformedFrame, OversizeFrame, UnknownVariant
from .payloads import PAYLOAD_REGISTRY, Payload

FRAME_CAP = 1024 * 1024  # 1 MiB

_ENVELOPE_KEYS = {"seq", "roomId", "senderId", "sentAt", "payload"}

SERVER_SENDER = "server"


@dataclass(frozen=True)
class Envelope:
    seq: int
    room_id: str
    sender_id: str
    sent_at: float
    payload: Payload

    def to_wire(self) -> dict:
        return {
            "seq": self.seq,
            "roomId": self.room_id,
            "senderId": self.sender_id,
            "sentAt": self.sent_at,
            "payload": self.payload.to_wire(),
        }


def encode(envelope: Envelope) -> bytes:
    frame = json.dumps(envelope.to_wire(), sort_keys=True, separators=(",", ":")).encode("utf-8")
    if len(frame) > FRAME_CAP:
        raise OversizeFrame(f"frame of {len(frame)} bytes exceeds the {FRAME_CAP} byte cap")
    return frame


def decode(frame: bytes | str) -> Envelope:
    if isinstance(frame, str):
        frame = frame.encode("utf-8")
    if not isinstance(frame, (bytes, bytearray)):
        raise MalformedFrame("frame must be bytes")
    if len(frame) > FRAME_CAP:
        raise OversizeFrame(f"frame of {len(frame)} bytes exceeds the {FRAME_CAP} byte cap")
    try:
        doc = json.loads(frame.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedFrame(f"frame is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedFrame("frame must be a JSON object")
    keys = set(doc)
    if keys != _ENVELOPE_KEYS:
        missing, unknown = _ENVELOPE_KEYS - keys, keys - _ENVELOPE_KEYS
        raise MalformedFrame(f"envelope keys wrong: missing={sorted(missing)} unknown={sorted(unknown)}")

    seq = doc["seq"]
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        raise MalformedFrame("seq must be a non-negative integer")
    room_id = doc["roomId"]
    sender_id = doc["senderId"]
    if not isinstance(room_id, str) or not room_id:
        raise MalformedFrame("roomId must be a non-empty string")
    if not isinstance(sender_id, str) or not sender_id:
        raise MalformedFrame("senderId must be a non-empty string")
    sent_at = doc["sentAt"]
    if (
        not isinstance(sent_at, (int, float))
        or isinstance(sent_at, bool)
        or not math.isfinite(sent_at)
    ):
        raise MalformedFrame("sentAt must be a finite number")

    payload_doc = doc["payload"]
    if not isinstance(payload_doc, dict):
        raise MalformedFrame("payload must be an object")
    kind = payload_doc.get("kind")
    if not isinstance(kind, str):
        raise MalformedFrame("payload.kind must be a string")
    cls = PAYLOAD_REGISTRY.get(kind)
    if cls is None:
        raise UnknownVariant(f"unknown payload kind {kind!r}")
    payload = cls.from_wire(payload_doc)
    return Envelope(
        seq=seq,
        room_id=room_id,
        sender_id=sender_id,
        sent_at=float(sent_at),
        payload=payload,
    )
