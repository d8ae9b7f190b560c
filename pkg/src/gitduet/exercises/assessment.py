"""The single-command proficiency assessment.

Nine questions, each solvable by one git command entered in a fresh
fixture repository under a 15-minute overall limit. Every question is
graded by a predicate over observable state - the repository snapshot
before the attempt, the snapshot after, and the raw terminal transcript -
never by matching the command text, so any command that produces the
required state counts.
"""

from __future__ import annotations

import base64
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from ..repostate import HeadMode, RepoSnapshot, run_git, snapshot
from ..sandbox.policy import (
    CommitIdentity,
    SandboxPolicy,
    build_command_farm,
    sandbox_env,
)
from ..sandbox.terminal import TerminalDims, TerminalSession

TIME_LIMIT_MINUTES = 15


@dataclass(frozen=True)
class AssessmentCapture:
    """Serializable observable state used by question predicates."""

    snapshot: RepoSnapshot
    # branch name -> relative path -> file bytes (None when absent), for
    # the paths the question declared interest in
    branch_files: tuple[tuple[str, tuple[tuple[str, Optional[bytes]], ...]], ...] = ()
    # branch name -> sorted tuple of all paths at the tip tree
    branch_trees: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def files_of(self, branch: str) -> dict[str, Optional[bytes]]:
        return dict(dict(self.branch_files).get(branch, ()))

    def tree_of(self, branch: str) -> tuple[str, ...]:
        return dict(self.branch_trees).get(branch, ())

    def branch_target(self, branch: str) -> Optional[str]:
        return self.snapshot.local_branches().get(branch)

    def head_branch(self) -> Optional[str]:
        head = self.snapshot.head
        if head.mode is not HeadMode.DETACHED and head.ref:
            return head.ref[len("refs/heads/"):]
        return None

    def head_commit(self) -> Optional[str]:
        head = self.snapshot.head
        if head.mode is HeadMode.DETACHED:
            return head.commit
        if head.ref:
            return self.snapshot.ref_map().get(head.ref)
        return None

    def is_ancestor(self, maybe_ancestor: str, descendant: str) -> bool:
        return maybe_ancestor in self.snapshot.reachable_from(descendant)

    def to_wire(self) -> dict:
        return {
            "snapshot": self.snapshot.to_wire(),
            "branchFiles": {
                branch: {
                    path: (base64.b64encode(data).decode() if data is not None else None)
                    for path, data in files
                }
                for branch, files in self.branch_files
            },
            "branchTrees": {branch: list(tree) for branch, tree in self.branch_trees},
        }

    @classmethod
    def from_wire(cls, d: dict) -> "AssessmentCapture":
        return cls(
            snapshot=RepoSnapshot.from_wire(d["snapshot"]),
            branch_files=tuple(
                sorted(
                    (
                        branch,
                        tuple(
                            sorted(
                                (path, base64.b64decode(blob) if blob is not None else None)
                                for path, blob in files.items()
                            )
                        ),
                    )
                    for branch, files in d["branchFiles"].items()
                )
            ),
            branch_trees=tuple(
                sorted((branch, tuple(tree)) for branch, tree in d["branchTrees"].items())
            ),
        )


Predicate = Callable[[AssessmentCapture, AssessmentCapture, str], bool]


@dataclass(frozen=True)
class AssessmentQuestion:
    index: int
    prompt: str
    fixture_script: str
    predicate: Predicate
    capture_paths: tuple[str, ...] = ()
    canonical_commands: tuple[str, ...] = ()


@dataclass(frozen=True)
class AssessmentSpec:
    questions: tuple[AssessmentQuestion, ...]
    time_limit_minutes: int = TIME_LIMIT_MINUTES


@dataclass(frozen=True)
class AssessmentResult:
    outcomes: tuple[tuple[int, bool], ...]
    score_pct: float

    def outcome_map(self) -> dict[int, bool]:
        return dict(self.outcomes)

    def to_wire(self) -> dict:
        return {
            "outcomes": {str(i): ok for i, ok in self.outcomes},
            "scorePct": round(self.score_pct, 2),
        }


def grade_assessment_question(
    question: AssessmentQuestion,
    pre: AssessmentCapture,
    post: AssessmentCapture,
    transcript: str,
) -> bool:
    return bool(question.predicate(pre, post, transcript))


def grade_assessment(spec: AssessmentSpec, outcomes: dict[int, bool]) -> AssessmentResult:
    ordered = tuple((q.index, bool(outcomes.get(q.index, False))) for q in spec.questions)
    correct = sum(1 for _, ok in ordered if ok)
    return AssessmentResult(
        outcomes=ordered, score_pct=100.0 * correct / len(ordered) if ordered else 0.0
    )


def pair_score(result_a: AssessmentResult, result_b: AssessmentResult) -> float:
    """A pair's prior-knowledge measure: the mean of both members' scores."""
    return (result_a.score_pct + result_b.score_pct) / 2.0


# --- the nine bundled questions -----------------------------------------------

def _q1_commit_with_message(pre, post, transcript):
    branch = post.head_branch()
    if branch is None:
        return False
    tip = post.branch_target(branch)
    if tip is None:
        return False
    node = post.snapshot.commit_by_hash().get(tip)
    return (
        node is not None
        and node.summary.strip() == "added new_file"
        and "new_file" in post.tree_of(branch)
    )


def _q2_switch_to_dev(pre, post, transcript):
    return post.head_branch() == "dev"


def _q3_list_branches(pre, post, transcript):
    return all(name in transcript for name in ("main", "dev", "feature-x"))


def _q4_create_branch_d(pre, post, transcript):
    return post.branch_target("branchD") is not None


def _q5_merge_dev_into_main(pre, post, transcript):
    dev, main = post.branch_target("dev"), post.branch_target("main")
    return dev is not None and main is not None and post.is_ancestor(dev, main)


def _q6_rebase_dev_onto_main(pre, post, transcript):
    main_pre, main_post = pre.branch_target("main"), post.branch_target("main")
    dev_post = post.branch_target("dev")
    if main_post is None or dev_post is None or main_pre != main_post:
        return False
    if not post.is_ancestor(main_post, dev_post):
        return False
    rebased = post.snapshot.reachable_from(dev_post) - post.snapshot.reachable_from(main_post)
    nodes = post.snapshot.commit_by_hash()
    return all(len(nodes[h].parents) == 1 for h in rebased)


def _q7_tag_version1(pre, post, transcript):
    tag = post.snapshot.ref_map().get("refs/tags/version1")
    return tag is not None and tag == pre.head_commit()


def _q8_merge_with_resolution(pre, post, transcript):
    dev, main = post.branch_target("dev"), post.branch_target("main")
    if dev is None or main is None or not post.is_ancestor(dev, main):
        return False
    content = post.files_of("main").get("file.txt")
    return content is not None and content.decode("utf-8", "replace").strip() == "ABCD"


def _q9_stash_everything(pre, post, transcript):
    status = post.snapshot.status
    return not status.staged and not status.modified and not status.untracked


BUILTIN_QUESTIONS: tuple[AssessmentQuestion, ...] = (
    AssessmentQuestion(
        index=1,
        prompt="Create a new commit with the commit message `added new_file` "
               "which contains the file `new_file`.",
        fixture_script="""
git init -q --initial-branch=main .
echo base > base.txt
git add base.txt
git commit -q -m base
echo fresh content > new_file
git add new_file
""",
        predicate=_q1_commit_with_message,
        canonical_commands=('git commit -m "added new_file"',),
    ),
    AssessmentQuestion(
        index=2,
        prompt="You are currently on the branch `main`. Switch to the branch `dev`.",
        fixture_script="""
git init -q --initial-branch=main .
echo base > base.txt
git add base.txt
git commit -q -m base
git branch dev
""",
        predicate=_q2_switch_to_dev,
        canonical_commands=("git checkout dev",),
    ),
    AssessmentQuestion(
        index=3,
        prompt="Use the terminal to list all branches in your local repository.",
        fixture_script="""
git init -q --initial-branch=main .
echo base > base.txt
git add base.txt
git commit -q -m base
git branch dev
git branch feature-x
""",
        predicate=_q3_list_branches,
        canonical_commands=("git branch",),
    ),
    AssessmentQuestion(
        index=4,
        prompt="Create a new branch `branchD`.",
        fixture_script="""
git init -q --initial-branch=main .
echo base > base.txt
git add base.txt
git commit -q -m base
""",
        predicate=_q4_create_branch_d,
        canonical_commands=("git branch branchD",),
    ),
    AssessmentQuestion(
        index=5,
        prompt="Merge the branch `dev` into `main`.",
        fixture_script="""
git init -q --initial-branch=main .
echo base > base.txt
git add base.txt
git commit -q -m base
git checkout -q -b dev
echo dev work > dev.txt
git add dev.txt
git commit -q -m "dev work"
git checkout -q main
""",
        predicate=_q5_merge_dev_into_main,
        canonical_commands=("git merge dev",),
    ),
    AssessmentQuestion(
        index=6,
        prompt="Rebase the `dev` branch onto `main`.",
        fixture_script="""
git init -q --initial-branch=main .
echo base > base.txt
git add base.txt
git commit -q -m base
git checkout -q -b dev
echo dev work > dev.txt
git add dev.txt
git commit -q -m "dev work"
git checkout -q main
echo main work > main2.txt
git add main2.txt
git commit -q -m "main work"
git checkout -q dev
""",
        predicate=_q6_rebase_dev_onto_main,
        canonical_commands=("git rebase main",),
    ),
    AssessmentQuestion(
        index=7,
        prompt="Tag your current commit with the label `version1`.",
        fixture_script="""
git init -q --initial-branch=main .
echo base > base.txt
git add base.txt
git commit -q -m base
echo more > more.txt
git add more.txt
git commit -q -m more
""",
        predicate=_q7_tag_version1,
        canonical_commands=("git tag version1",),
    ),
    AssessmentQuestion(
        index=8,
        prompt="Merge the branch `dev` into `main`, ensuring that the file "
               "`file.txt` contains (only!) the string `ABCD` after the merge.",
        fixture_script="""
git init -q --initial-branch=main .
echo base > file.txt
git add file.txt
git commit -q -m base
git checkout -q -b dev
echo dev version > file.txt
git add file.txt
git commit -q -m "dev edit"
git checkout -q main
echo main version > file.txt
git add file.txt
git commit -q -m "main edit"
""",
        predicate=_q8_merge_with_resolution,
        capture_paths=("file.txt",),
        canonical_commands=(
            "git merge dev",
            "printf 'ABCD\\n' > file.txt",
            "git add file.txt",
            'git commit -m "merge dev into main"',
        ),
    ),
    AssessmentQuestion(
        index=9,
        prompt="Stash all your current changes.",
        fixture_script="""
git init -q --initial-branch=main .
echo v1 > notes.txt
git add notes.txt
git commit -q -m "notes v1"
echo v2 in progress > notes.txt
""",
        predicate=_q9_stash_everything,
        canonical_commands=("git stash",),
    ),
)

BUILTIN_ASSESSMENT = AssessmentSpec(questions=BUILTIN_QUESTIONS)


def capture_assessment_state(root: Path, capture_paths: tuple[str, ...]) -> AssessmentCapture:
    snap = snapshot(root)
    branch_files = []
    branch_trees = []
    for branch in sorted(snap.local_branches()):
        listing = run_git(root, "ls-tree", "-r", "--name-only", f"refs/heads/{branch}")
        branch_trees.append((branch, tuple(sorted(listing.stdout.split()))))
        files = []
        for path in capture_paths:
            show = run_git(root, "show", f"refs/heads/{branch}:{path}", check=False)
            files.append((path, show.stdout.encode() if show.returncode == 0 else None))
        branch_files.append((branch, tuple(files)))
    return AssessmentCapture(
        snapshot=snap,
        branch_files=tuple(branch_files),
        branch_trees=tuple(branch_trees),
    )


@dataclass
class QuestionRun:
    question: AssessmentQuestion
    pre: AssessmentCapture
    post: AssessmentCapture
    transcript: str
    passed: bool


class AssessmentRunner:
    """Drives an attempt through real fixtures and a real pty terminal."""

    def __init__(
        self,
        base_dir: Path | str,
        policy: SandboxPolicy = SandboxPolicy(),
        command_timeout: float = 20.0,
    ):
        self.base_dir = Path(base_dir)
        self.base_dir.mkdir(parents=True, exist_ok=True)
        self.policy = policy
        self.command_timeout = command_timeout
        self._farm = build_command_farm(policy, self.base_dir / ".bin")

    def run(
        self,
        spec: AssessmentSpec,
        commands_for: Callable[[AssessmentQuestion], tuple[str, ...]],
        identity: CommitIdentity = CommitIdentity(),
    ) -> tuple[AssessmentResult, list[QuestionRun]]:
        runs: list[QuestionRun] = []
        outcomes: dict[int, bool] = {}
        deadline = time.monotonic() + spec.time_limit_minutes * 60
        for question in spec.questions:
            commands = commands_for(question) if time.monotonic() < deadline else ()
            run = self._run_question(question, commands, identity)
            outcomes[question.index] = run.passed
            runs.append(run)
        return grade_assessment(spec, outcomes), runs

    def _run_question(
        self,
        question: AssessmentQuestion,
        commands: tuple[str, ...],
        identity: CommitIdentity,
    ) -> QuestionRun:
        fixture = self.base_dir / f"q{question.index}"
        if fixture.exists():
            import shutil

            shutil.rmtree(fixture)
        fixture.mkdir(parents=True)
        env = sandbox_env(
            self.policy, self._farm, fixture, fixture / ".fixture-scratch",
            ceiling_dir=self.base_dir, identity=identity,
        )
        setup = subprocess.run(
            ["bash", "-e", "-c", question.fixture_script],
            cwd=str(fixture),
            env=env,
            capture_output=True,
            text=True,
        )
        if setup.returncode != 0:
            raise RuntimeError(
                f"assessment fixture {question.index} failed: {setup.stderr}"
            )
        pre = capture_assessment_state(fixture, question.capture_paths)

        transcript = ""
        if commands:
            transcript = self._drive_terminal(fixture, env, commands)
        post = capture_assessment_state(fixture, question.capture_paths)
        passed = grade_assessment_question(question, pre, post, transcript)
        return QuestionRun(question=question, pre=pre, post=post, transcript=transcript, passed=passed)

    def _drive_terminal(self, fixture: Path, env: dict, commands: tuple[str, ...]) -> str:
        chunks: list[bytes] = []
        got = threading.Condition()

        def on_output(data: bytes) -> None:
            with got:
                chunks.append(data)
                got.notify_all()

        term = TerminalSession(
            workspace_id="assessment",
            cwd=fixture,
            env=env,
            dims=TerminalDims(cols=120, rows=40),
            on_output=on_output,
            debounce=0.05,
        )
        try:
            for n, command in enumerate(commands):
                term.write(command.encode() + b"\n")
                marker_value = 9000 + n
                term.write(f"echo DONE-$(({marker_value}+1))\n".encode())
                needle = f"DONE-{marker_value + 1}"
                deadline = time.monotonic() + self.command_timeout
                with got:
                    while needle not in b"".join(chunks).decode("utf-8", "replace"):
                        remaining = deadline - time.monotonic()
                        if remaining <= 0:
                            raise TimeoutError(f"command {command!r} did not settle")
                        got.wait(remaining)
        finally:
            term.close()
        return b"".join(chunks).decode("utf-8", "replace")
