import json
import shutil
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest
from click.testing import CliRunner

from gitduet.cli import main
from gitduet.exercises import builtin_exercises_dir


@pytest.fixture
def runner():
    return CliRunner()


class TestExerciseValidate:
    def test_bundled_hangman_validates(self, runner):
        result = runner.invoke(main, ["exercise", "validate", str(builtin_exercises_dir() / "hangman")])
        assert result.exit_code == 0, result.output + str(result.stderr_bytes)
        assert "4 tasks" in result.output
        assert "task 4 checkpoints" in result.output

    def test_missing_manifest_exits_2(self, runner, tmp_path):
        (tmp_path / "empty").mkdir()
        result = runner.invoke(main, ["exercise", "validate", str(tmp_path / "empty")])
        assert result.exit_code == 2
        assert "MANIFEST_INVALID" in result.stderr

    def test_failing_reference_exits_3(self, runner, tmp_path):
        broken = tmp_path / "broken"
        shutil.copytree(builtin_exercises_dir() / "hangman", broken)
        (broken / "reference.sh").write_text("echo kaput >&2\nexit 9\ncheckpoint 1\n")
        result = runner.invoke(main, ["exercise", "validate", str(broken)])
        assert result.exit_code == 3
        assert "SCRIPT_FAILED" in result.stderr
        assert "kaput" in result.stderr


class TestBotRun:
    def test_reference_scripts_score_100(self, runner, tmp_path):
        bots = builtin_exercises_dir() / "hangman" / "bots"
        result = runner.invoke(main, [
            "bot", "run",
            "--exercise", "hangman",
            "--script-a", str(bots / "reference_a.txt"),
            "--script-b", str(bots / "reference_b.txt"),
            "--transcripts", str(tmp_path / "transcripts"),
        ])
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.output.strip().splitlines()[-1])
        assert report["performancePct"] == 100.0
        assert (tmp_path / "transcripts" / "client_a.log").exists()

    def test_step_timeout_exits_5(self, runner, tmp_path):
        script_a = tmp_path / "a.txt"
        script_b = tmp_path / "b.txt"
        script_a.write_text("WAIT_FOR_REPO_STATE remote has_branch never-appears\n")
        script_b.write_text("CONFIRM\n")
        result = runner.invoke(main, [
            "bot", "run",
            "--exercise", "hangman",
            "--script-a", str(script_a),
            "--script-b", str(script_b),
            "--step-timeout", "1.5",
        ])
        assert result.exit_code == 5
        assert "BOT_STEP_TIMEOUT" in result.stderr


class TestOfflineGrade:
    def test_empty_repos_score_zero_and_bad_dir_exits_4(self, runner, tmp_path):
        for name in ("a", "b", "r"):
            subprocess.run(["git", "init", "-q", str(tmp_path / name)], check=True)
        result = runner.invoke(main, [
            "grade",
            "--exercise", str(builtin_exercises_dir() / "hangman"),
            "--workdir-a", str(tmp_path / "a"),
            "--workdir-b", str(tmp_path / "b"),
            "--remote", str(tmp_path / "r"),
        ])
        assert result.exit_code == 0, result.stderr
        assert json.loads(result.output)["performancePct"] == 0.0

        (tmp_path / "plain").mkdir()
        result = runner.invoke(main, [
            "grade",
            "--exercise", str(builtin_exercises_dir() / "hangman"),
            "--workdir-a", str(tmp_path / "plain"),
            "--workdir-b", str(tmp_path / "b"),
            "--remote", str(tmp_path / "r"),
        ])
        assert result.exit_code == 4
        assert "NOT_A_REPOSITORY" in result.stderr


class TestServe:
    def test_missing_exercises_dir_fails_fast(self, runner, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"exercises_dir": str(tmp_path / "nope")}))
        result = runner.invoke(main, ["serve", "--config", str(config)])
        assert result.exit_code == 2
        assert "EXERCISES_NOT_FOUND" in result.stderr

    def test_invalid_config_fails(self, runner, tmp_path):
        config = tmp_path / "config.json"
        config.write_text("{broken json")
        result = runner.invoke(main, ["serve", "--config", str(config)])
        assert result.exit_code != 0

    def test_port_in_use_names_address(self, runner, tmp_path):
        blocker = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        blocker.bind(("127.0.0.1", 0))
        port = blocker.getsockname()[1]
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"host": "127.0.0.1", "port": port}))
        try:
            result = runner.invoke(main, ["serve", "--config", str(config)])
            assert result.exit_code == 1
            assert f"127.0.0.1:{port}" in result.stderr
        finally:
            blocker.close()

    def test_live_server_answers_exercises_within_two_seconds(self, tmp_path):
        free = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        free.bind(("127.0.0.1", 0))
        port = free.getsockname()[1]
        free.close()
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "host": "127.0.0.1",
            "port": port,
            "sandbox_dir": str(tmp_path / "rooms"),
        }))
        proc = subprocess.Popen(
            [sys.executable, "-m", "gitduet.cli", "serve", "--config", str(config)],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )
        try:
            import httpx

            # exercise validation happens at boot; the liveness clock starts
            # once the socket answers
            deadline = time.time() + 30
            body = None
            first_answer = None
            while time.time() < deadline:
                try:
                    response = httpx.get(f"http://127.0.0.1:{port}/exercises", timeout=2.0)
                    first_answer = first_answer or time.time()
                    body = response.json()
                    break
                except Exception:
                    time.sleep(0.1)
            assert body is not None, proc.stderr.read(4000) if proc.poll() is not None else "no answer"
            assert {e["id"] for e in body} >= {"hangman", "arctic"}
        finally:
            proc.terminate()
            proc.wait(timeout=10)
