"""Grading by repository-state equivalence.

A graded task passes only when learner A's local repo, learner B's local
repo, and the shared remote are each state-equivalent to the reference
checkpoint - which is exactly the "both solved their sub-task AND pushed"
bar: correct work left unpushed leaves the remote short and fails the task.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import IncompleteOutcomes, NotARepository
from ..repostate import StateDigest, capture_state_digest, is_repository, state_equivalent
from .manifest import ExerciseSpec, RoomCheckpoint, TaskSpec


@dataclass(frozen=True)
class GradeReport:
    exercise_id: str
    outcomes: tuple[tuple[int, bool], ...]  # graded tasks only, ascending index
    performance_pct: float

    def outcome_map(self) -> dict[int, bool]:
        return dict(self.outcomes)

    def to_wire(self) -> dict:
        return {
            "exerciseId": self.exercise_id,
            "outcomes": {str(i): passed for i, passed in self.outcomes},
            "performancePct": round(self.performance_pct, 2),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_wire(), sort_keys=True, separators=(",", ":"))


def grade_task(
    task: TaskSpec,
    digest_a: StateDigest,
    digest_b: StateDigest,
    digest_remote: StateDigest,
) -> bool:
    """True iff all three repositories match the task's checkpoint."""
    if not task.graded or task.checkpoint is None:
        raise ValueError(f"task {task.index} is not graded")
    checkpoint = task.checkpoint
    return (
        state_equivalent(digest_a, checkpoint.local_a, task.strict_topology)
        and state_equivalent(digest_b, checkpoint.local_b, task.strict_topology)
        and state_equivalent(digest_remote, checkpoint.remote, task.strict_topology)
    )


def grade_exercise(spec: ExerciseSpec, outcomes: dict[int, bool]) -> GradeReport:
    """Aggregate per-task outcomes: the percentage of graded tasks passed."""
    graded = spec.graded_tasks()
    missing = [t.index for t in graded if t.index not in outcomes]
    if missing:
        raise IncompleteOutcomes(f"no outcome recorded for graded tasks {missing}")
    ordered = tuple((t.index, bool(outcomes[t.index])) for t in graded)
    passed = sum(1 for _, ok in ordered if ok)
    pct = 100.0 * passed / len(ordered) if ordered else 0.0
    return GradeReport(exercise_id=spec.id, outcomes=ordered, performance_pct=pct)


@dataclass(frozen=True)
class RoomStateDigests:
    local_a: StateDigest
    local_b: StateDigest
    remote: StateDigest

    def matches(self, checkpoint: RoomCheckpoint, strict: bool = False) -> bool:
        return (
            state_equivalent(self.local_a, checkpoint.local_a, strict)
            and state_equivalent(self.local_b, checkpoint.local_b, strict)
            and state_equivalent(self.remote, checkpoint.remote, strict)
        )


def capture_room_digests(dir_a: Path | str, dir_b: Path | str, dir_remote: Path | str) -> RoomStateDigests:
    for label, path in (("workdir-a", dir_a), ("workdir-b", dir_b), ("remote", dir_remote)):
        if not Path(path).is_dir() or not is_repository(path):
            raise NotARepository(f"{label} at {path} is not a git repository")
    return RoomStateDigests(
        local_a=capture_state_digest(dir_a),
        local_b=capture_state_digest(dir_b),
        remote=capture_state_digest(dir_remote),
    )


def grade_directories(spec: ExerciseSpec, states: RoomStateDigests) -> GradeReport:
    """Offline grading of terminal repository states.

    Tasks build cumulatively, so only one checkpoint can match the final
    state; a task counts as passed when the final state matches its own
    checkpoint or any later one (reaching checkpoint j implies the work of
    every earlier task is present). Runs abandoned between checkpoints
    match nothing and fail the remaining tasks, which is the information
    available from end states alone.
    """
    graded = spec.graded_tasks()
    matched: int | None = None
    for task in sorted(spec.tasks, key=lambda t: t.index, reverse=True):
        if task.checkpoint is not None and states.matches(task.checkpoint, task.strict_topology):
            matched = task.index
            break
    outcomes = {t.index: matched is not None and t.index <= matched for t in graded}
    return grade_exercise(spec, outcomes)
