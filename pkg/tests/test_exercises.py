import json
import shutil
from pathlib import Path

import pytest
from conftest import git, init_repo

from gitduet.errors import (
    IncompleteOutcomes,
    ManifestInvalid,
    NotARepository,
    ScriptFailed,
)
from gitduet.exercises import (
    GradeReport,
    builtin_exercises_dir,
    capture_room_digests,
    grade_directories,
    grade_exercise,
    grade_task,
    load_exercise,
    replay_reference,
    split_reference_script,
)
from gitduet.exercises.grading import RoomStateDigests
from gitduet.repostate import StateDigest, capture_state_digest
from gitduet.sandbox import WorkspaceManager


@pytest.fixture(scope="module")
def hangman():
    return load_exercise(builtin_exercises_dir() / "hangman")


@pytest.fixture(scope="module")
def arctic():
    return load_exercise(builtin_exercises_dir() / "arctic")


class TestBundledExercises:
    def test_hangman_shape(self, hangman):
        assert hangman.id == "hangman"
        assert hangman.task_count() == 4
        assert not hangman.task(1).graded
        assert [t.index for t in hangman.graded_tasks()] == [2, 3, 4]
        # single shared branch everywhere
        for task in hangman.tasks:
            for digest in (task.checkpoint.local_a, task.checkpoint.local_b, task.checkpoint.remote):
                assert set(digest.branch_map()) == {"main"}

    def test_arctic_shape(self, arctic):
        assert arctic.task_count() == 4
        assert not arctic.task(1).graded
        # separate per-site branches in the checkpoints
        final = arctic.task(4).checkpoint
        assert set(final.remote.branch_map()) == {"main", "site-alpha", "site-beta"}
        assert set(final.local_a.branch_map()) == {"main", "site-alpha"}
        assert set(final.local_b.branch_map()) == {"main", "site-beta"}

    def test_hangman_checkpoints_converge(self, hangman):
        # after every graded task all three repos agree on main's content
        for task in hangman.graded_tasks():
            cp = task.checkpoint
            assert cp.local_a.branch_map()["main"] == cp.remote.branch_map()["main"]
            assert cp.local_b.branch_map()["main"] == cp.remote.branch_map()["main"]

    def test_time_limits_carried(self, hangman, arctic):
        assert hangman.time_limit_minutes == 25
        assert arctic.time_limit_minutes == 25


class TestManifestValidation:
    def _copy_hangman(self, tmp_path) -> Path:
        target = tmp_path / "copy"
        shutil.copytree(builtin_exercises_dir() / "hangman", target)
        return target

    def test_missing_manifest(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        with pytest.raises(ManifestInvalid):
            load_exercise(empty)

    def test_missing_role_script(self, tmp_path):
        broken = self._copy_hangman(tmp_path)
        (broken / "setup_role_b.sh").unlink()
        with pytest.raises(ManifestInvalid):
            load_exercise(broken)

    def test_graded_warmup_rejected(self, tmp_path):
        broken = self._copy_hangman(tmp_path)
        doc = json.loads((broken / "manifest.json").read_text())
        doc["tasks"][0]["graded"] = True
        (broken / "manifest.json").write_text(json.dumps(doc))
        with pytest.raises(ManifestInvalid):
            load_exercise(broken)

    def test_non_contiguous_indexes_rejected(self, tmp_path):
        broken = self._copy_hangman(tmp_path)
        doc = json.loads((broken / "manifest.json").read_text())
        doc["tasks"][2]["index"] = 9
        (broken / "manifest.json").write_text(json.dumps(doc))
        with pytest.raises(ManifestInvalid):
            load_exercise(broken)

    def test_failing_reference_rejected(self, tmp_path):
        broken = self._copy_hangman(tmp_path)
        (broken / "reference.sh").write_text("exit 7\ncheckpoint 1\n")
        with pytest.raises(ScriptFailed):
            load_exercise(broken)

    def test_trailing_commands_after_last_checkpoint(self):
        with pytest.raises(ManifestInvalid):
            split_reference_script("checkpoint 1\ngit status\n")

    def test_segment_split(self):
        segments = split_reference_script(
            "# prep\ngit -C x status\ncheckpoint 1\ngit -C y status\ncheckpoint 2\n"
        )
        assert [idx for idx, _ in segments] == [1, 2]
        assert "git -C x status" in segments[0][1]
        assert "git -C y status" in segments[1][1]


class TestGradeExercise:
    def test_partial_outcomes_formula(self, hangman):
        report = grade_exercise(hangman, {2: True, 3: False, 4: True})
        assert abs(report.performance_pct - 66.67) <= 0.01 + 1e-9
        assert report.to_wire()["performancePct"] == 66.67

    def test_all_pass_and_all_fail(self, hangman):
        assert grade_exercise(hangman, {2: True, 3: True, 4: True}).performance_pct == 100.0
        assert grade_exercise(hangman, {2: False, 3: False, 4: False}).performance_pct == 0.0

    def test_warmup_never_counts(self, hangman):
        with_warmup = grade_exercise(hangman, {1: False, 2: True, 3: True, 4: True})
        without = grade_exercise(hangman, {1: True, 2: True, 3: True, 4: True})
        assert with_warmup.performance_pct == without.performance_pct == 100.0
        assert 1 not in with_warmup.outcome_map()

    def test_incomplete_outcomes(self, hangman):
        with pytest.raises(IncompleteOutcomes):
            grade_exercise(hangman, {2: True, 3: True})

    def test_report_json_deterministic(self, hangman):
        a = grade_exercise(hangman, {2: True, 3: False, 4: True}).to_json()
        b = grade_exercise(hangman, {2: True, 3: False, 4: True}).to_json()
        assert a == b
        parsed = json.loads(a)
        assert parsed["exerciseId"] == "hangman"
        assert parsed["outcomes"] == {"2": True, "3": False, "4": True}


class TestGradeTask:
    def test_checkpoint_matches_itself(self, hangman):
        task = hangman.task(2)
        cp = task.checkpoint
        assert grade_task(task, cp.local_a, cp.local_b, cp.remote)

    def test_unpushed_remote_fails(self, hangman):
        # remote one task behind: B's push never happened
        task = hangman.task(3)
        stale_remote = hangman.task(2).checkpoint.remote
        cp = task.checkpoint
        assert not grade_task(task, cp.local_a, cp.local_b, stale_remote)

    def test_grading_is_deterministic(self, hangman):
        task = hangman.task(4)
        cp = task.checkpoint
        first = grade_task(task, cp.local_a, cp.local_b, cp.remote)
        second = grade_task(task, cp.local_a, cp.local_b, cp.remote)
        assert first == second

    def test_ungraded_task_rejected(self, hangman):
        cp = hangman.task(2).checkpoint
        with pytest.raises(ValueError):
            grade_task(hangman.task(1), cp.local_a, cp.local_b, cp.remote)


class TestOfflineGrading:
    def test_reference_end_state_scores_full(self, hangman, tmp_path):
        manager = WorkspaceManager(tmp_path / "rooms")
        _, room = replay_reference(manager, hangman.setup, hangman.reference_script)
        try:
            states = capture_room_digests(
                room.local_a.root, room.local_b.root, room.remote.root
            )
            report = grade_directories(hangman, states)
            assert report.performance_pct == 100.0
        finally:
            manager.destroy_room(room)

    def test_intermediate_state_scores_partial(self, hangman):
        # a run abandoned right after task 2's confirmation
        cp2 = hangman.task(2).checkpoint
        states = RoomStateDigests(local_a=cp2.local_a, local_b=cp2.local_b, remote=cp2.remote)
        report = grade_directories(hangman, states)
        assert report.outcome_map() == {2: True, 3: False, 4: False}

    def test_empty_repos_score_zero(self, hangman, tmp_path):
        for name in ("a", "b", "r"):
            init_repo(tmp_path / name)
        states = capture_room_digests(tmp_path / "a", tmp_path / "b", tmp_path / "r")
        assert grade_directories(hangman, states).performance_pct == 0.0

    def test_not_a_repository(self, tmp_path, hangman):
        (tmp_path / "plain").mkdir()
        with pytest.raises(NotARepository):
            capture_room_digests(tmp_path / "plain", tmp_path / "plain", tmp_path / "plain")
