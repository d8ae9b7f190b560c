import base64
import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gitduet.errors import MalformedFrame, NotAMember, OversizeFrame, UnknownVariant
from gitduet.wire import (
    CLIENT_KINDS,
    FRAME_CAP,
    GUARD_RULES,
    MUTATING_KINDS,
    PAYLOAD_REGISTRY,
    READ_ONLY_PEER,
    SERVER_KINDS,
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
    TextPosition,
    apply_read_only_guard,
    decode,
    encode,
    route,
)

SNAPSHOT_DOC = {
    "commits": [],
    "refs": [],
    "head": {"mode": "unborn", "ref": "refs/heads/main"},
    "status": {"staged": [], "modified": [], "untracked": []},
    "capturedAt": 12.5,
}

DELTA_DOC = {
    "addedCommits": [],
    "removedCommits": [],
    "changedRefs": [{"name": "refs/heads/main", "newTarget": "a" * 40}],
    "headChanged": False,
    "statusChanged": False,
    "newCapturedAt": 13.5,
}


def env(payload, sender="m1", seq=1):
    return Envelope(seq=seq, room_id="room1", sender_id=sender, sent_at=10.0, payload=payload)


ALL_PAYLOADS = [
    TerminalInput(session_id="s1", data=b"git status\n"),
    TerminalOutput(session_id="s1", workspace_role="localA", data=b"On branch main"),
    FileSaved(workspace_role="localA", path="a.txt", new_content_digest="ab" * 32),
    FileContent(workspace_role="localB", path="b.txt", data=b"hello"),
    FileWrite(workspace_role="localA", path="c.txt", data=b"body"),
    CursorMoved(component="editor", x=0.5, y=0.5),
    CursorMoved(
        component="terminal", x=0.0, y=1.0, text_position=TextPosition("a.txt", 3, 0)
    ),
    FocusChanged(component="gitTree"),
    RepoState(workspace_role="localA", scope="local", snapshot=SNAPSHOT_DOC),
    RepoState(workspace_role="remote", scope="remote", delta=DELTA_DOC),
    Presence(member_id="m2", display_name="May", avatar="fox", event="joined"),
    TaskAdvance(task_index=2, confirmed_by=("m1",)),
    GradeUpdate(report={"exerciseId": "hangman", "outcomes": {"2": True}, "performancePct": 100.0}),
    ErrorPayload(code="READ_ONLY_PEER", detail="nope"),
]


class TestCodec:
    @pytest.mark.parametrize("payload", ALL_PAYLOADS, ids=lambda p: p.kind)
    def test_round_trip_identity(self, payload):
        e = env(payload)
        assert decode(encode(e)) == e

    def test_unknown_variant(self):
        doc = env(FocusChanged(component="editor")).to_wire()
        doc["payload"] = {"kind": "mindReading", "component": "editor"}
        with pytest.raises(UnknownVariant):
            decode(json.dumps(doc).encode())

    def test_unknown_field_rejected(self):
        doc = env(FocusChanged(component="editor")).to_wire()
        doc["payload"]["sneaky"] = 1
        with pytest.raises(MalformedFrame):
            decode(json.dumps(doc).encode())

    def test_unknown_envelope_key_rejected(self):
        doc = env(FocusChanged(component="editor")).to_wire()
        doc["extra"] = True
        with pytest.raises(MalformedFrame):
            decode(json.dumps(doc).encode())

    def test_cursor_out_of_range_rejected(self):
        doc = env(CursorMoved(component="editor", x=0.5, y=0.5)).to_wire()
        doc["payload"]["x"] = 1.5
        with pytest.raises(MalformedFrame):
            decode(json.dumps(doc).encode())

    def test_bad_base64_rejected(self):
        doc = env(TerminalInput(session_id="s1", data=b"x")).to_wire()
        doc["payload"]["bytes"] = "not base64!!"
        with pytest.raises(MalformedFrame):
            decode(json.dumps(doc).encode())

    def test_repo_state_requires_exactly_one_body(self):
        doc = env(RepoState(workspace_role="localA", scope="local", snapshot=SNAPSHOT_DOC)).to_wire()
        doc["payload"]["delta"] = DELTA_DOC
        with pytest.raises(MalformedFrame):
            decode(json.dumps(doc).encode())
        del doc["payload"]["delta"]
        del doc["payload"]["snapshot"]
        with pytest.raises(MalformedFrame):
            decode(json.dumps(doc).encode())

    def test_64k_terminal_output_round_trips(self):
        e = env(TerminalOutput(session_id="s", workspace_role="localA", data=b"x" * 65536))
        assert decode(encode(e)) == e

    def test_oversize_frame_rejected(self):
        e = env(TerminalOutput(session_id="s", workspace_role="localA", data=b"x" * (10 * 1024 * 1024)))
        with pytest.raises(OversizeFrame):
            encode(e)
        padding = b'{"pad": "' + b"y" * (FRAME_CAP + 10) + b'"}'
        with pytest.raises(OversizeFrame):
            decode(padding)

    def test_payload_size_sweep_against_cap(self):
        # the base64 + envelope overhead puts the usable payload a bit
        # below the cap; verify behaviour flips exactly at encoded size
        for size in (0, 1, 1024, 64 * 1024, 512 * 1024):
            e = env(TerminalOutput(session_id="s", workspace_role="localA", data=b"z" * size))
            frame = encode(e)
            assert len(frame) <= FRAME_CAP
            assert decode(frame) == e
        with pytest.raises(OversizeFrame):
            encode(env(TerminalOutput(session_id="s", workspace_role="localA", data=b"z" * FRAME_CAP)))

    @settings(max_examples=300, deadline=None)
    @given(st.binary(max_size=2048))
    def test_fuzz_totality_random_bytes(self, blob):
        try:
            decode(blob)
        except (MalformedFrame, UnknownVariant, OversizeFrame):
            pass

    @settings(max_examples=300, deadline=None)
    @given(st.recursive(
        st.none() | st.booleans() | st.integers() | st.floats(allow_nan=False) | st.text(max_size=20),
        lambda children: st.lists(children, max_size=4) | st.dictionaries(st.text(max_size=8), children, max_size=4),
        max_leaves=12,
    ))
    def test_fuzz_totality_json_shaped(self, doc):
        try:
            decode(json.dumps(doc).encode())
        except (MalformedFrame, UnknownVariant, OversizeFrame):
            pass

    @settings(max_examples=200, deadline=None)
    @given(
        seq=st.integers(min_value=0, max_value=2**40),
        sender=st.text(min_size=1, max_size=12),
        x=st.floats(min_value=0, max_value=1, allow_nan=False),
        y=st.floats(min_value=0, max_value=1, allow_nan=False),
        data=st.binary(max_size=256),
    )
    def test_generated_envelope_round_trip(self, seq, sender, x, y, data):
        for payload in (
            CursorMoved(component="editor", x=x, y=y),
            TerminalInput(session_id="s1", data=data),
        ):
            e = Envelope(seq=seq, room_id="r", sender_id=sender, sent_at=1.25, payload=payload)
            assert decode(encode(e)) == e


SPLIT_VIEW = RoomView(
    mode=RoomMode.SPLIT,
    member_roles={"alice": "localA", "bob": "localB"},
    session_owners={"sessA": "localA", "sessB": "localB"},
)
REGULAR_VIEW = RoomView(
    mode=RoomMode.REGULAR,
    member_roles={"alice": "localA", "bob": "localB"},
    session_owners={"sessA": "localA", "sessB": "localB"},
)


class TestRouting:
    def test_split_cursor_goes_to_peer_only(self):
        got = route(env(CursorMoved(component="editor", x=0.5, y=0.5), sender="alice"), SPLIT_VIEW)
        assert got == {"bob"}

    def test_regular_cursor_goes_nowhere(self):
        got = route(env(CursorMoved(component="editor", x=0.5, y=0.5), sender="alice"), REGULAR_VIEW)
        assert got == frozenset()

    def test_regular_terminal_output_echoes_owner_only(self):
        payload = TerminalOutput(session_id="sessA", workspace_role="localA", data=b"x")
        assert route(env(payload, sender=SERVER_SENDER), REGULAR_VIEW) == {"alice"}

    def test_split_terminal_output_reaches_both(self):
        payload = TerminalOutput(session_id="sessA", workspace_role="localA", data=b"x")
        assert route(env(payload, sender=SERVER_SENDER), SPLIT_VIEW) == {"alice", "bob"}

    def test_presence_is_mode_independent(self):
        payload = Presence(member_id="bob", display_name="Bob", avatar="owl", event="joined")
        for view in (SPLIT_VIEW, REGULAR_VIEW):
            assert route(env(payload, sender=SERVER_SENDER), view) == {"alice", "bob"}

    def test_remote_repo_state_reaches_both_in_any_mode(self):
        payload = RepoState(workspace_role="remote", scope="remote", snapshot=SNAPSHOT_DOC)
        for view in (SPLIT_VIEW, REGULAR_VIEW):
            assert route(env(payload, sender=SERVER_SENDER), view) == {"alice", "bob"}

    def test_local_repo_state_respects_mode(self):
        payload = RepoState(workspace_role="localB", scope="local", snapshot=SNAPSHOT_DOC)
        assert route(env(payload, sender=SERVER_SENDER), SPLIT_VIEW) == {"alice", "bob"}
        assert route(env(payload, sender=SERVER_SENDER), REGULAR_VIEW) == {"bob"}

    def test_client_mutating_payloads_are_consumed(self):
        for payload in (
            TerminalInput(session_id="sessA", data=b"ls\n"),
            FileWrite(workspace_role="localA", path="a", data=b"x"),
            TaskAdvance(task_index=1, confirmed_by=("alice",)),
        ):
            assert route(env(payload, sender="alice"), SPLIT_VIEW) == frozenset()

    def test_non_member_raises(self):
        with pytest.raises(NotAMember):
            route(env(FocusChanged(component="editor"), sender="stranger"), SPLIT_VIEW)

    def test_no_peer_awareness_in_regular_mode_exhaustive(self):
        # every payload a member can send must stay away from the peer
        for payload in (
            CursorMoved(component="editor", x=0.1, y=0.1),
            FocusChanged(component="reference"),
            TerminalInput(session_id="sessA", data=b"x"),
            FileWrite(workspace_role="localA", path="p", data=b"x"),
            TaskAdvance(task_index=1, confirmed_by=("alice",)),
        ):
            assert "bob" not in route(env(payload, sender="alice"), REGULAR_VIEW)


class TestGuard:
    def test_peer_terminal_input_rejected(self):
        decision = apply_read_only_guard(
            env(TerminalInput(session_id="sessA", data=b"rm -rf .\n"), sender="bob"), SPLIT_VIEW
        )
        assert not decision.accepted
        assert decision.error_code == READ_ONLY_PEER

    def test_own_terminal_input_accepted(self):
        decision = apply_read_only_guard(
            env(TerminalInput(session_id="sessA", data=b"git log\n"), sender="alice"), SPLIT_VIEW
        )
        assert decision.accepted

    def test_peer_file_write_rejected(self):
        decision = apply_read_only_guard(
            env(FileWrite(workspace_role="localA", path="a.txt", data=b"x"), sender="bob"),
            SPLIT_VIEW,
        )
        assert not decision.accepted
        assert decision.error_code == READ_ONLY_PEER

    def test_remote_file_write_rejected(self):
        decision = apply_read_only_guard(
            env(FileWrite(workspace_role="remote", path="a.txt", data=b"x"), sender="bob"),
            SPLIT_VIEW,
        )
        assert not decision.accepted

    def test_client_sending_server_kind_rejected(self):
        decision = apply_read_only_guard(
            env(Presence(member_id="bob", display_name="B", avatar="owl", event="joined"), sender="bob"),
            SPLIT_VIEW,
        )
        assert not decision.accepted
        assert decision.error_code == "INVALID_PAYLOAD"

    def test_non_member_raises(self):
        with pytest.raises(NotAMember):
            apply_read_only_guard(
                env(TerminalInput(session_id="sessA", data=b"x"), sender="stranger"), SPLIT_VIEW
            )

    def test_guard_rules_are_exhaustive(self):
        # adding a client-visible variant without a guard rule must fail here
        assert set(GUARD_RULES) == set(CLIENT_KINDS)
        assert MUTATING_KINDS <= CLIENT_KINDS
        assert CLIENT_KINDS | SERVER_KINDS == set(PAYLOAD_REGISTRY)
        assert not (CLIENT_KINDS & SERVER_KINDS)


class TestSchemaFile:
    def test_schema_matches_registry(self):
        schema_path = Path(__file__).resolve().parents[1] / "src/gitduet/wire/schema.json"
        schema = json.loads(schema_path.read_text())
        assert set(schema["payloads"]) == set(PAYLOAD_REGISTRY)
        assert schema["frame"]["byteCap"] == FRAME_CAP
        for kind, cls in PAYLOAD_REGISTRY.items():
            documented = {
                key.rstrip("?") for key in schema["payloads"][kind]["fields"]
            }
            # field-name agreement is checked structurally: encode a sample
            sample = next(p for p in ALL_PAYLOADS if p.kind == kind)
            wire_fields = set(sample.to_wire()) - {"kind"}
            assert wire_fields <= documented, kind
