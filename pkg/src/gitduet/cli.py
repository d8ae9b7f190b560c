"""Operator command line.

    gitduet serve --config server.json         run the HTTP/WebSocket server
    gitduet exercise validate <dir>            validate one exercise directory
    gitduet bot run --exercise hangman ...     scripted pair through a full room
    gitduet grade --exercise <dir> ...         offline grading of three repos

Exit codes: 0 ok, 2 manifest problem, 3 script failure, 4 bad grading
input, 5 step timeout.
"""

from __future__ import annotations

import json
import signal
import socket
import sys
import tempfile
import threading
import time
from pathlib import Path

import click

from .bots import BotTimeout, run_bot_pair
from .errors import (
    CheckpointMissing,
    GitDuetError,
    ManifestInvalid,
    NotARepository,
    ScriptFailed,
    SetupScriptFailed,
)
from .exercises import (
    builtin_exercises_dir,
    capture_room_digests,
    grade_directories,
    load_catalog,
    load_exercise,
)
from .reference import load_doc_index
from .rooms import RoomRegistry
from .sandbox import IsolationBackend, SandboxPolicy, WorkspaceManager
from .wire import RoomMode

EXIT_MANIFEST = 2
EXIT_SCRIPT = 3
EXIT_GRADING_INPUT = 4
EXIT_TIMEOUT = 5


@click.group()
def main():
    """Paired Git practice server and its offline tooling."""


# --- serve --------------------------------------------------------------


def _load_config(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise click.ClickException(f"config file {path} does not exist")
    except json.JSONDecodeError as exc:
        raise click.ClickException(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise click.ClickException("config must be a JSON object")
    return doc


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
def serve(config_path: Path):
    """Start the server described by a JSON config file."""
    import uvicorn

    from .api import create_app

    config = _load_config(config_path)
    host = config.get("host", "127.0.0.1")
    port = int(config.get("port", 8008))

    exercises_dir = Path(config.get("exercises_dir") or builtin_exercises_dir())
    if not exercises_dir.is_dir():
        click.echo(f"EXERCISES_NOT_FOUND: no exercise directory at {exercises_dir}", err=True)
        sys.exit(EXIT_MANIFEST)

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        click.echo(f"cannot listen on {host}:{port}: {exc}", err=True)
        sys.exit(1)
    finally:
        probe.close()

    policy_doc = config.get("policy", {})
    policy = SandboxPolicy(
        isolation=IsolationBackend(policy_doc.get("isolation", "tempdir_process")),
        network_allowed=bool(policy_doc.get("network_allowed", False)),
        cpu_seconds=policy_doc.get("cpu_seconds"),
        memory_bytes=policy_doc.get("memory_bytes"),
    )
    sandbox_dir = Path(config.get("sandbox_dir") or tempfile.mkdtemp(prefix="gitduet-rooms-"))
    manager = WorkspaceManager(
        sandbox_dir, policy, snapshot_debounce=float(config.get("snapshot_debounce", 0.3))
    )
    click.echo(f"validating exercises under {exercises_dir} ...", err=True)
    catalog = load_catalog(exercises_dir)
    registry = RoomRegistry(
        manager, catalog, gc_idle_seconds=float(config.get("gc_idle_seconds", 7200))
    )
    doc_index = load_doc_index(
        Path(config["doc_index_path"]) if config.get("doc_index_path") else None
    )
    app = create_app(registry, doc_index)

    stop = threading.Event()

    def housekeeping():
        while not stop.wait(15):
            registry.check_timers()
            registry.collect_idle()

    keeper = threading.Thread(target=housekeeping, daemon=True)
    keeper.start()

    click.echo(f"gitduet listening on {host}:{port} with {len(catalog)} exercises", err=True)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        stop.set()
        for room in registry.live_rooms():
            registry.destroy_room(room.id)


# --- exercise validate -------------------------------------------------------


@main.group()
def exercise():
    """Exercise authoring helpers."""


@exercise.command()
@click.argument("directory", type=click.Path(path_type=Path))
def validate(directory: Path):
    """Validate an exercise: manifest, scripts, and reference solution."""
    try:
        spec = load_exercise(directory)
    except ManifestInvalid as exc:
        click.echo(f"MANIFEST_INVALID: {exc.message}", err=True)
        sys.exit(EXIT_MANIFEST)
    except (ScriptFailed, SetupScriptFailed, CheckpointMissing) as exc:
        click.echo(f"SCRIPT_FAILED: {exc.message}", err=True)
        stderr = getattr(exc, "stderr", "")
        if stderr:
            click.echo(stderr, err=True)
        sys.exit(EXIT_SCRIPT)

    click.echo(f"{spec.id}: {spec.task_count()} tasks ({len(spec.graded_tasks())} graded)")
    for task in spec.tasks:
        if task.checkpoint is None:
            click.echo(f"  task {task.index}: no checkpoint (ungraded)")
            continue
        click.echo(f"  task {task.index} checkpoints:")
        for label, digest in (
            ("localA", task.checkpoint.local_a),
            ("localB", task.checkpoint.local_b),
            ("remote", task.checkpoint.remote),
        ):
            branches = " ".join(f"{b}={d[:12]}" for b, d in digest.branches)
            click.echo(f"    {label}: {branches}")


# --- bot run ------------------------------------------------------------------


@main.command()
@click.argument("action", type=click.Choice(["run"]))
@click.option("--exercise", "exercise_id", required=True)
@click.option("--script-a", required=True, type=click.Path(path_type=Path))
@click.option("--script-b", required=True, type=click.Path(path_type=Path))
@click.option("--mode", type=click.Choice(["split", "regular"]), default="split")
@click.option("--exercises-dir", type=click.Path(path_type=Path), default=None)
@click.option("--step-timeout", type=float, default=30.0, show_default=True)
@click.option("--transcripts", type=click.Path(path_type=Path), default=None,
              help="Write each client's received envelopes to this directory.")
def bot(action, exercise_id, script_a, script_b, mode, exercises_dir, step_timeout, transcripts):
    """Drive two scripted clients through a full room: `gitduet bot run ...`"""
    exercises_root = exercises_dir or builtin_exercises_dir()
    try:
        catalog = load_catalog(exercises_root)
    except ManifestInvalid as exc:
        click.echo(f"MANIFEST_INVALID: {exc.message}", err=True)
        sys.exit(EXIT_MANIFEST)
    except (ScriptFailed, SetupScriptFailed) as exc:
        click.echo(f"SCRIPT_FAILED: {exc.message}", err=True)
        sys.exit(EXIT_SCRIPT)

    with tempfile.TemporaryDirectory(prefix="gitduet-bots-") as sandbox:
        manager = WorkspaceManager(Path(sandbox), snapshot_debounce=0.15)
        registry = RoomRegistry(manager, catalog)
        try:
            result = run_bot_pair(
                registry,
                exercise_id,
                Path(script_a).read_text(),
                Path(script_b).read_text(),
                mode=RoomMode(mode),
                step_timeout=step_timeout,
            )
        except BotTimeout as exc:
            click.echo(f"BOT_STEP_TIMEOUT: {exc.message}", err=True)
            sys.exit(EXIT_TIMEOUT)
        except GitDuetError as exc:
            click.echo(f"{exc.code}: {exc.message}", err=True)
            sys.exit(EXIT_SCRIPT)

        for label, client in (("a", result.client_a), ("b", result.client_b)):
            lines = [
                f"{e.sender_id} seq={e.seq} {e.payload.kind}" for e in client.transcript
            ]
            if transcripts:
                Path(transcripts).mkdir(parents=True, exist_ok=True)
                (Path(transcripts) / f"client_{label}.log").write_text("\n".join(lines) + "\n")
            else:
                click.echo(f"--- client {label}: {len(lines)} envelopes received", err=True)
                for line in lines:
                    click.echo(f"  {line}", err=True)

        report = result.report
        if report is None:
            # scripts ended before the final task; report what was graded
            report = {
                "exerciseId": exercise_id,
                "outcomes": {str(k): v for k, v in sorted(result.outcomes.items())},
                "performancePct": None,
            }
        click.echo(json.dumps(report, sort_keys=True, separators=(",", ":")))
        registry.destroy_room(result.room.id)


# --- offline grade --------------------------------------------------------------


@main.command()
@click.option("--exercise", "exercise_dir", required=True, type=click.Path(path_type=Path))
@click.option("--workdir-a", required=True, type=click.Path(path_type=Path))
@click.option("--workdir-b", required=True, type=click.Path(path_type=Path))
@click.option("--remote", required=True, type=click.Path(path_type=Path))
def grade(exercise_dir, workdir_a, workdir_b, remote):
    """Grade three on-disk repositories against an exercise's checkpoints."""
    try:
        spec = load_exercise(exercise_dir)
    except ManifestInvalid as exc:
        click.echo(f"MANIFEST_INVALID: {exc.message}", err=True)
        sys.exit(EXIT_MANIFEST)
    except (ScriptFailed, SetupScriptFailed, CheckpointMissing) as exc:
        click.echo(f"SCRIPT_FAILED: {exc.message}", err=True)
        sys.exit(EXIT_SCRIPT)
    try:
        states = capture_room_digests(workdir_a, workdir_b, remote)
    except NotARepository as exc:
        click.echo(f"NOT_A_REPOSITORY: {exc.message}", err=True)
        sys.exit(EXIT_GRADING_INPUT)
    report = grade_directories(spec, states)
    click.echo(report.to_json())


if __name__ == "__main__":
    main()
