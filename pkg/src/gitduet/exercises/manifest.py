"""Exercise definitions: manifest parsing and validation.

An exercise is a directory holding `manifest.json`, two narrative markdown
files, and four shell scripts (common seed, per-role setup, reference
solution). Loading always validates: the room is provisioned in a
throwaway sandbox and the reference solution is replayed, recording the
canonical end state of every task as grading checkpoints.

The reference script marks task boundaries with standalone lines of the
form ``checkpoint N``. The harness splits the script at those markers and
runs each segment under ``bash -e`` with the working directory at the room
root and LOCAL_A / LOCAL_B / REMOTE_URL / REMOTE_DIR in the environment;
segments run in fresh shells, so scripts must not rely on state carried
across a checkpoint.
"""

from __future__ import annotations

import json
import os
import re
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..errors import CheckpointMissing, ManifestInvalid, ScriptFailed, SetupScriptFailed
from ..repostate import StateDigest, capture_state_digest
from ..sandbox import SandboxPolicy, SetupBundle, WorkspaceManager
from ..sandbox.policy import SETUP_IDENTITY, sandbox_env

MANIFEST_NAME = "manifest.json"
_CHECKPOINT_RE = re.compile(r"^\s*checkpoint\s+(\d+)\s*$")
_REFERENCE_TIMEOUT = 120.0


@dataclass(frozen=True)
class RoomCheckpoint:
    """Canonical end state of one task, per repository."""

    local_a: StateDigest
    local_b: StateDigest
    remote: StateDigest

    def to_wire(self) -> dict:
        return {
            "localA": self.local_a.to_wire(),
            "localB": self.local_b.to_wire(),
            "remote": self.remote.to_wire(),
        }


@dataclass(frozen=True)
class TaskSpec:
    index: int
    graded: bool
    strict_topology: bool
    description_a: str
    description_b: str
    checkpoint: Optional[RoomCheckpoint] = None


@dataclass
class ExerciseSpec:
    id: str
    title: str
    narrative_a: str
    narrative_b: str
    tasks: list[TaskSpec]
    setup: SetupBundle
    reference_script: Path
    directory: Path
    expected_commands: tuple[str, ...] = ()
    time_limit_minutes: Optional[int] = None

    def task(self, index: int) -> TaskSpec:
        for task in self.tasks:
            if task.index == index:
                return task
        raise KeyError(index)

    def graded_tasks(self) -> list[TaskSpec]:
        return [t for t in self.tasks if t.graded]

    def task_count(self) -> int:
        return len(self.tasks)


def _fail(why: str) -> ManifestInvalid:
    return ManifestInvalid(why)


def _read_manifest(directory: Path) -> dict:
    path = directory / MANIFEST_NAME
    if not path.is_file():
        raise _fail(f"{directory} has no {MANIFEST_NAME}")
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise _fail(f"unreadable manifest: {exc}")
    if not isinstance(doc, dict):
        raise _fail("manifest must be a JSON object")
    return doc


def _script_path(directory: Path, doc: dict, key: str) -> Path:
    scripts = doc.get("scripts")
    if not isinstance(scripts, dict) or key not in scripts:
        raise _fail(f"manifest scripts.{key} missing")
    path = directory / scripts[key]
    if not path.is_file():
        raise _fail(f"script {scripts[key]} does not exist")
    if not os.access(path, os.X_OK):
        raise _fail(f"script {scripts[key]} is not executable")
    return path


def _narrative(directory: Path, doc: dict, key: str) -> str:
    name = doc.get(key)
    if not isinstance(name, str) or not name:
        raise _fail(f"manifest {key} missing")
    path = directory / name
    if not path.is_file():
        raise _fail(f"narrative file {name} does not exist")
    return path.read_text()


def _parse_tasks(doc: dict) -> list[TaskSpec]:
    raw = doc.get("tasks")
    if not isinstance(raw, list) or not raw:
        raise _fail("manifest needs at least one task")
    tasks: list[TaskSpec] = []
    for i, entry in enumerate(raw, start=1):
        if not isinstance(entry, dict):
            raise _fail(f"task {i} must be an object")
        for key in ("index", "graded", "description_a", "description_b"):
            if key not in entry:
                raise _fail(f"task {i} missing {key}")
        if entry["index"] != i:
            raise _fail(f"task indexes must be contiguous from 1, got {entry['index']} at {i}")
        tasks.append(
            TaskSpec(
                index=i,
                graded=bool(entry["graded"]),
                strict_topology=bool(entry.get("strict_topology", False)),
                description_a=str(entry["description_a"]),
                description_b=str(entry["description_b"]),
            )
        )
    if tasks[0].graded:
        raise _fail("task 1 is the warm-up and must be ungraded")
    return tasks


def split_reference_script(text: str) -> list[tuple[int, str]]:
    """(task index, script segment) pairs in file order."""
    segments: list[tuple[int, str]] = []
    current: list[str] = []
    for line in text.splitlines():
        marker = _CHECKPOINT_RE.match(line)
        if marker:
            segments.append((int(marker.group(1)), "\n".join(current) + "\n"))
            current = []
        else:
            current.append(line)
    if any(line.strip() and not line.lstrip().startswith("#") for line in current):
        raise _fail("reference script has commands after the final checkpoint")
    return segments


def replay_reference(
    manager: WorkspaceManager,
    setup: SetupBundle,
    reference_script: Path,
    room_id: Optional[str] = None,
):
    """Provision a room and replay the reference; the caller owns the room.

    Returns (checkpoints by task index, the room at its end state).
    """
    segments = split_reference_script(reference_script.read_text())
    room = manager.provision_room(setup, room_id=room_id)
    try:
        env = sandbox_env(
            manager.policy,
            manager.base_dir / ".bin",
            room.room_dir,
            room.room_dir / ".refscratch",
            ceiling_dir=manager.base_dir,
            identity=SETUP_IDENTITY,
            extra={
                "LOCAL_A": str(room.local_a.root),
                "LOCAL_B": str(room.local_b.root),
                "REMOTE_URL": str(room.remote.root),
                "REMOTE_DIR": str(room.remote.root),
            },
        )
        checkpoints: dict[int, RoomCheckpoint] = {}
        for task_index, body in segments:
            proc = subprocess.run(
                ["bash", "-e", "-c", body],
                cwd=str(room.room_dir),
                env=env,
                capture_output=True,
                text=True,
                timeout=_REFERENCE_TIMEOUT,
            )
            if proc.returncode != 0:
                tail = "\n".join(proc.stderr.splitlines()[-12:])
                raise ScriptFailed(
                    f"reference solution failed before checkpoint {task_index}",
                    stderr=tail,
                )
            checkpoints[task_index] = RoomCheckpoint(
                local_a=capture_state_digest(room.local_a.root),
                local_b=capture_state_digest(room.local_b.root),
                remote=capture_state_digest(room.remote.root),
            )
        return checkpoints, room
    except Exception:
        manager.destroy_room(room)
        raise


def run_reference_solution(
    manager: WorkspaceManager,
    setup: SetupBundle,
    reference_script: Path,
    room_id: Optional[str] = None,
) -> dict[int, RoomCheckpoint]:
    """Provision a throwaway room, replay the reference, capture checkpoints."""
    checkpoints, room = replay_reference(manager, setup, reference_script, room_id)
    manager.destroy_room(room)
    return checkpoints


def load_exercise(directory: Path | str, manager: Optional[WorkspaceManager] = None) -> ExerciseSpec:
    """Parse, validate, and checkpoint one exercise directory."""
    directory = Path(directory)
    doc = _read_manifest(directory)

    exercise_id = doc.get("id")
    title = doc.get("title")
    if not isinstance(exercise_id, str) or not exercise_id:
        raise _fail("manifest id missing")
    if not isinstance(title, str) or not title:
        raise _fail("manifest title missing")

    tasks = _parse_tasks(doc)
    setup = SetupBundle(
        common=_script_path(directory, doc, "common"),
        role_a=_script_path(directory, doc, "role_a"),
        role_b=_script_path(directory, doc, "role_b"),
    )
    reference = _script_path(directory, doc, "reference")
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        raise _fail("metadata must be an object")

    if manager is None:
        with tempfile.TemporaryDirectory(prefix="gitduet-validate-") as scratch:
            checkpoints = run_reference_solution(
                WorkspaceManager(Path(scratch), SandboxPolicy()), setup, reference
            )
    else:
        checkpoints = run_reference_solution(manager, setup, reference)

    checked_tasks: list[TaskSpec] = []
    for task in tasks:
        checkpoint = checkpoints.get(task.index)
        if task.graded and checkpoint is None:
            raise CheckpointMissing(
                f"graded task {task.index} has no checkpoint marker in the reference solution"
            )
        checked_tasks.append(
            TaskSpec(
                index=task.index,
                graded=task.graded,
                strict_topology=task.strict_topology,
                description_a=task.description_a,
                description_b=task.description_b,
                checkpoint=checkpoint,
            )
        )

    return ExerciseSpec(
        id=exercise_id,
        title=title,
        narrative_a=_narrative(directory, doc, "narrative_a"),
        narrative_b=_narrative(directory, doc, "narrative_b"),
        tasks=checked_tasks,
        setup=setup,
        reference_script=reference,
        directory=directory,
        expected_commands=tuple(metadata.get("expected_commands", ())),
        time_limit_minutes=metadata.get("time_limit_minutes"),
    )


def builtin_exercises_dir() -> Path:
    return Path(__file__).resolve().parent / "builtin"


def load_catalog(
    directory: Path | str, manager: Optional[WorkspaceManager] = None
) -> dict[str, ExerciseSpec]:
    """Load every exercise under ``directory`` (one subdirectory each)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ManifestInvalid(f"exercise directory {directory} does not exist")
    catalog: dict[str, ExerciseSpec] = {}
    for entry in sorted(directory.iterdir()):
        if entry.is_dir() and (entry / MANIFEST_NAME).is_file():
            spec = load_exercise(entry, manager=manager)
            if spec.id in catalog:
                raise ManifestInvalid(f"duplicate exercise id {spec.id}")
            catalog[spec.id] = spec
    if not catalog:
        raise ManifestInvalid(f"no exercises found under {directory}")
    return catalog
