"""Exercise catalog, validation, grading, and the command assessment."""

from .grading import (
    GradeReport,
    RoomStateDigests,
    capture_room_digests,
    grade_directories,
    grade_exercise,
    grade_task,
)
from .assessment import (
    BUILTIN_ASSESSMENT,
    AssessmentCapture,
    AssessmentQuestion,
    AssessmentResult,
    AssessmentRunner,
    AssessmentSpec,
    capture_assessment_state,
    grade_assessment,
    grade_assessment_question,
    pair_score,
)
from .manifest import (
    ExerciseSpec,
    RoomCheckpoint,
    TaskSpec,
    builtin_exercises_dir,
    load_catalog,
    load_exercise,
    replay_reference,
    run_reference_solution,
    split_reference_script,
)

__all__ = [
    "AssessmentCapture",
    "AssessmentQuestion",
    "AssessmentResult",
    "AssessmentRunner",
    "AssessmentSpec",
    "BUILTIN_ASSESSMENT",
    "ExerciseSpec",
    "GradeReport",
    "RoomCheckpoint",
    "RoomStateDigests",
    "TaskSpec",
    "builtin_exercises_dir",
    "capture_assessment_state",
    "capture_room_digests",
    "grade_assessment",
    "grade_assessment_question",
    "grade_directories",
    "grade_exercise",
    "grade_task",
    "load_catalog",
    "load_exercise",
    "pair_score",
    "replay_reference",
    "run_reference_solution",
    "split_reference_script",
]
