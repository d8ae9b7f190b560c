import json

import pytest
from conftest import commit_file, git, init_repo
from gitscripts import build_random_script, mutate_tip_file, run_script
from oracle import oracle_commits, oracle_refs

from gitduet import repostate
from gitduet.errors import NotARepository, SnapshotTooLarge, UnknownRef
from gitduet.repostate import (
    CommitNode,
    HeadMode,
    HeadState,
    RefEntry,
    RefKind,
    RepoSnapshot,
    WorkingStatus,
    apply_delta,
    capture_state_digest,
    diff_snapshots,
    make_snapshot,
    snapshot,
    state_equivalent,
    tree_digest,
)


class TestSnapshot:
    def test_empty_repo(self, repo):
        snap = snapshot(repo)
        assert snap.commits == ()
        assert snap.refs == ()
        assert snap.head.mode is HeadMode.UNBORN
        assert snap.head.ref == "refs/heads/main"

    def test_three_commits_with_side_branch(self, repo):
        # Expected values below were frozen from direct plumbing queries
        # (oracle.py) on this exact construction.
        commit_file(repo, "a.txt", "one", "first", when=1_700_000_000)
        commit_file(repo, "b.txt", "two", "second", when=1_700_000_060)
        git(repo, "branch", "dev")
        commit_file(repo, "c.txt", "three", "third", when=1_700_000_120)

        snap = snapshot(repo)
        expected_commits = oracle_commits(repo)
        expected_refs = oracle_refs(repo)

        assert snap.commit_hashes() == set(expected_commits)
        assert len(snap.commits) == 3
        assert {c.hash: c.parents for c in snap.commits} == expected_commits
        assert snap.ref_map() == expected_refs
        assert snap.head == HeadState(mode=HeadMode.ATTACHED, ref="refs/heads/main")

        main_tip = expected_refs["refs/heads/main"]
        dev_tip = expected_refs["refs/heads/dev"]
        by_hash = snap.commit_by_hash()
        assert by_hash[main_tip].parents == (dev_tip,)
        assert by_hash[main_tip].summary == "third"
        assert by_hash[main_tip].timestamp == 1_700_000_120
        assert by_hash[main_tip].author == "Test Author"

    def test_remote_tracking_ref_after_fetch(self, tmp_path):
        upstream = init_repo(tmp_path / "upstream")
        commit_file(upstream, "x.txt", "x", "seed")
        local = init_repo(tmp_path / "local")
        git(local, "remote", "add", "origin", str(upstream))
        git(local, "fetch", "-q", "origin")
        snap = snapshot(local)
        kinds = {r.name: r.kind for r in snap.refs}
        assert kinds["refs/remotes/origin/main"] is RefKind.REMOTE_TRACKING
        assert snap.ref_map() == oracle_refs(local)

    def test_detached_head(self, repo):
        commit_file(repo, "a.txt", "one", "first")
        commit_file(repo, "b.txt", "two", "second")
        first = git(repo, "rev-list", "--max-parents=0", "HEAD").stdout.strip()
        git(repo, "checkout", "-q", first)
        snap = snapshot(repo)
        assert snap.head == HeadState(mode=HeadMode.DETACHED, commit=first)

    def test_annotated_tag_peels_to_commit(self, repo):
        commit_file(repo, "a.txt", "one", "first")
        git(repo, "tag", "-a", "v1", "-m", "release one")
        snap = snapshot(repo)
        assert snap.ref_map()["refs/tags/v1"] == oracle_refs(repo)["refs/tags/v1"]
        assert {r.kind for r in snap.refs if r.name == "refs/tags/v1"} == {RefKind.TAG}

    def test_bare_repo_has_empty_status(self, tmp_path):
        seed = init_repo(tmp_path / "seed")
        commit_file(seed, "a.txt", "one", "first")
        bare = tmp_path / "bare.git"
        git(tmp_path, "clone", "-q", "--bare", str(seed), str(bare))
        snap = snapshot(bare)
        assert snap.status == WorkingStatus()
        assert len(snap.commits) == 1

    def test_status_classification(self, repo):
        commit_file(repo, "tracked.txt", "v1", "first")
        commit_file(repo, "gone.txt", "bye", "second")
        (repo / "tracked.txt").write_text("v2")
        (repo / "fresh.txt").write_text("new")
        (repo / "staged.txt").write_text("staged")
        git(repo, "add", "staged.txt")
        git(repo, "rm", "-q", "--cached", "gone.txt")
        snap = snapshot(repo)
        assert "staged.txt" in snap.status.staged
        assert "gone.txt" in snap.status.staged  # staged deletion wins over untracked
        assert snap.status.modified == ("tracked.txt",)
        assert set(snap.status.untracked) == {"fresh.txt"}
        buckets = [set(snap.status.staged), set(snap.status.modified), set(snap.status.untracked)]
        # a path never lands in two buckets
        assert len(buckets[0] & buckets[1]) == 0
        assert len(buckets[0] & buckets[2]) == 0

    def test_multiline_commit_message(self, repo):
        (repo / "a.txt").write_text("one")
        git(repo, "add", "a.txt")
        git(repo, "commit", "-q", "-m", "summary line", "-m", "body text\nwith two lines")
        snap = snapshot(repo)
        assert snap.commits[0].summary == "summary line"
        assert "body text" in snap.commits[0].message

    def test_not_a_repository(self, tmp_path):
        with pytest.raises(NotARepository):
            snapshot(tmp_path / "nope")
        plain = tmp_path / "plain"
        plain.mkdir()
        with pytest.raises(NotARepository):
            snapshot(plain)

    def test_snapshot_cap(self, repo, monkeypatch):
        commit_file(repo, "a.txt", "one", "first")
        commit_file(repo, "b.txt", "two", "second")
        monkeypatch.setattr(repostate.extract, "MAX_COMMITS", 1)
        with pytest.raises(SnapshotTooLarge):
            repostate.extract.snapshot(repo)

    def test_reachability_closure_after_branch_delete(self, repo):
        commit_file(repo, "a.txt", "one", "first")
        git(repo, "checkout", "-q", "-b", "side")
        commit_file(repo, "side.txt", "s", "side work")
        git(repo, "checkout", "-q", "main")
        before = snapshot(repo)
        assert len(before.commits) == 2
        git(repo, "branch", "-D", "side")
        after = snapshot(repo)
        # the side commit is unreachable now and must disappear
        assert len(after.commits) == 1
        assert after.commit_hashes() == set(oracle_commits(repo))


class TestTreeDigest:
    def test_identical_scripts_different_times_equal_digests(self, tmp_path):
        steps = build_random_script(seed=7)
        run_script(tmp_path / "one", steps, date_base=1_700_000_000)
        run_script(tmp_path / "two", steps, date_base=1_800_000_000)
        h1 = git(tmp_path / "one", "rev-parse", "main").stdout
        h2 = git(tmp_path / "two", "rev-parse", "main").stdout
        assert h1 != h2  # hashes diverge with timestamps
        assert tree_digest(tmp_path / "one", "refs/heads/main") == tree_digest(
            tmp_path / "two", "refs/heads/main"
        )

    def test_deterministic(self, repo):
        commit_file(repo, "a.txt", "one", "first")
        assert tree_digest(repo, "refs/heads/main") == tree_digest(repo, "refs/heads/main")

    def test_unknown_ref(self, repo):
        commit_file(repo, "a.txt", "one", "first")
        with pytest.raises(UnknownRef):
            tree_digest(repo, "refs/heads/nope")


def _synthetic_snapshot(ref_targets: dict[str, str], commits: dict[str, tuple[str, ...]]):
    nodes = [
        CommitNode(hash=h, parents=p, message=f"m{h}", summary=f"m{h}", author="a", timestamp=1)
        for h, p in commits.items()
    ]
    refs = []
    for name, target in ref_targets.items():
        kind = RefKind.LOCAL_BRANCH if name.startswith("refs/heads/") else RefKind.TAG
        refs.append(RefEntry(name=name, kind=kind, target=target))
    head_ref = next(iter(sorted(ref_targets))) if ref_targets else "refs/heads/main"
    head = (
        HeadState(mode=HeadMode.ATTACHED, ref=head_ref)
        if ref_targets
        else HeadState(mode=HeadMode.UNBORN, ref="refs/heads/main")
    )
    return make_snapshot(nodes, refs, head)


class TestDiff:
    def test_identity(self, repo):
        commit_file(repo, "a.txt", "one", "first")
        snap = snapshot(repo)
        delta = diff_snapshots(snap, snap)
        assert delta.is_empty()

    def test_one_new_commit(self, repo):
        commit_file(repo, "a.txt", "one", "first")
        old = snapshot(repo)
        commit_file(repo, "b.txt", "two", "second")
        new = snapshot(repo)
        delta = diff_snapshots(old, new)
        # oracle: independent set difference over plumbing output
        expected_added = set(oracle_commits(repo)) - old.commit_hashes()
        assert delta.added_commits == expected_added
        assert delta.removed_commits == frozenset()
        assert [c.name for c in delta.changed_refs] == ["refs/heads/main"]
        change = delta.changed_refs[0]
        assert change.old_target == old.ref_map()["refs/heads/main"]
        assert change.new_target == new.ref_map()["refs/heads/main"]

    def test_branch_delete_removes_unreachable(self, repo):
        commit_file(repo, "a.txt", "one", "first")
        git(repo, "checkout", "-q", "-b", "side")
        commit_file(repo, "side.txt", "s", "side work")
        git(repo, "checkout", "-q", "main")
        old = snapshot(repo)
        git(repo, "branch", "-D", "side")
        new = snapshot(repo)
        delta = diff_snapshots(old, new)
        orphans = old.commit_hashes() - set(oracle_commits(repo))
        assert delta.removed_commits == orphans
        side = [c for c in delta.changed_refs if c.name == "refs/heads/side"]
        assert side and side[0].new_target is None

    def test_apply_round_trip_on_real_pairs(self, tmp_path):
        for seed in range(6):
            steps = build_random_script(seed=seed, length=10)
            root = tmp_path / f"r{seed}"
            run_script(root, steps[: len(steps) // 2])
            old = snapshot(root)
            for step in steps[len(steps) // 2:]:
                pass  # second half applied below via full rerun
            # extend the same repo with the remaining steps
            import gitscripts

            # replay remaining steps in-place
            gitscripts_steps = steps[len(steps) // 2:]
            _continue_script(root, gitscripts_steps)
            new = snapshot(root)
            rebuilt = apply_delta(old, diff_snapshots(old, new))
            assert rebuilt.commit_hashes() == new.commit_hashes()
            assert rebuilt.ref_map() == new.ref_map()
            assert rebuilt.head == new.head
            assert rebuilt.status == new.status

    def test_apply_round_trip_synthetic(self):
        a = _synthetic_snapshot(
            {"refs/heads/main": "a" * 40},
            {"a" * 40: ()},
        )
        b = _synthetic_snapshot(
            {"refs/heads/main": "b" * 40, "refs/tags/v1": "a" * 40},
            {"a" * 40: (), "b" * 40: ("a" * 40,)},
        )
        for old, new in [(a, b), (b, a), (a, a)]:
            rebuilt = apply_delta(old, diff_snapshots(old, new))
            assert rebuilt.commit_hashes() == new.commit_hashes()
            assert rebuilt.ref_map() == new.ref_map()

    def test_wire_round_trip(self, repo):
        commit_file(repo, "a.txt", "one", "first")
        old = snapshot(repo)
        commit_file(repo, "b.txt", "two", "second")
        new = snapshot(repo)
        delta = diff_snapshots(old, new)
        from gitduet.repostate import SnapshotDelta

        assert SnapshotDelta.from_wire(json.loads(json.dumps(delta.to_wire()))) == delta
        assert RepoSnapshot.from_wire(json.loads(new.canonical_json())) == new


def _continue_script(root, steps):
    from gitscripts import run_script as _rs  # reuse executor on an existing repo

    import gitscripts

    # executor bits inlined: run each remaining step against the existing repo
    tick = 5000

    def dates():
        nonlocal tick
        tick += 1
        stamp = f"{1_700_000_000 + tick * 60} +0000"
        return {"GIT_AUTHOR_DATE": stamp, "GIT_COMMITTER_DATE": stamp}

    for step in steps:
        kind = step[0]
        if kind == "commit":
            _, _branch, filename, content, message = step
            (root / filename).write_text(content)
            git(root, "add", filename)
            git(root, "commit", "-q", "-m", message, env_extra=dates())
        elif kind == "branch":
            git(root, "branch", step[1], check=False)
        elif kind == "switch":
            git(root, "checkout", "-q", step[1], check=False)
        elif kind == "merge":
            git(root, "merge", "-q", "--no-edit", "-m", step[2], step[1],
                env_extra=dates(), check=False)
        elif kind == "tag":
            git(root, "tag", "-f", step[1])
        elif kind == "delete":
            git(root, "branch", "-D", step[1], check=False)


class TestEquivalence:
    def test_replay_is_equivalent_despite_new_hashes(self, tmp_path):
        steps = build_random_script(seed=21)
        run_script(tmp_path / "a", steps, date_base=1_700_000_000)
        run_script(tmp_path / "b", steps, date_base=1_900_000_000)
        da = capture_state_digest(tmp_path / "a")
        db = capture_state_digest(tmp_path / "b")
        assert state_equivalent(da, db)
        assert state_equivalent(da, db, strict_topology=True)

    def test_missing_branch_breaks_equivalence(self, tmp_path):
        steps = [
            ("commit", "main", "a.txt", "one", "first"),
            ("branch", "dev"),
        ]
        run_script(tmp_path / "a", steps)
        run_script(tmp_path / "b", steps)
        git(tmp_path / "b", "branch", "-D", "dev")
        assert not state_equivalent(
            capture_state_digest(tmp_path / "a"), capture_state_digest(tmp_path / "b")
        )

    def test_one_byte_difference_breaks_equivalence(self, tmp_path):
        steps = build_random_script(seed=33)
        run_script(tmp_path / "a", steps)
        run_script(tmp_path / "b", steps)
        mutate_tip_file(tmp_path / "b")
        assert not state_equivalent(
            capture_state_digest(tmp_path / "a"), capture_state_digest(tmp_path / "b")
        )

    def test_reflexive_and_symmetric(self, tmp_path):
        steps = build_random_script(seed=5)
        run_script(tmp_path / "a", steps)
        run_script(tmp_path / "b", steps)
        da = capture_state_digest(tmp_path / "a")
        db = capture_state_digest(tmp_path / "b")
        assert state_equivalent(da, da)
        assert state_equivalent(db, db)
        assert state_equivalent(da, db) == state_equivalent(db, da)

    def test_rebase_vs_merge_same_content(self, tmp_path):
        def seed_pair(root):
            init_repo(root)
            commit_file(root, "base.txt", "base", "base")
            git(root, "checkout", "-q", "-b", "feature")
            commit_file(root, "feature.txt", "f", "feature work")
            git(root, "checkout", "-q", "main")
            commit_file(root, "main.txt", "m", "main work")

        merge_repo = tmp_path / "merge"
        rebase_repo = tmp_path / "rebase"
        seed_pair(merge_repo)
        seed_pair(rebase_repo)
        git(merge_repo, "merge", "-q", "--no-edit", "feature")
        git(rebase_repo, "checkout", "-q", "feature")
        git(rebase_repo, "rebase", "-q", "main")
        git(rebase_repo, "checkout", "-q", "main")
        git(rebase_repo, "merge", "-q", "--ff-only", "feature")
        # integrated either way; the scratch branch is gone in both endings
        git(merge_repo, "branch", "-D", "feature")
        git(rebase_repo, "branch", "-D", "feature")

        dm = capture_state_digest(merge_repo)
        dr = capture_state_digest(rebase_repo)
        assert state_equivalent(dm, dr)  # same content, different history
        assert not state_equivalent(dm, dr, strict_topology=True)


class TestParserOracleProperty:
    def test_randomized_repos_match_plumbing(self, tmp_path):
        mismatches = []
        for seed in range(12):
            root = tmp_path / f"repo{seed}"
            run_script(root, build_random_script(seed=seed, length=14))
            snap = snapshot(root)
            expected = oracle_commits(root)
            got = {c.hash: c.parents for c in snap.commits}
            if got != expected or snap.ref_map() != oracle_refs(root):
                mismatches.append(seed)
        assert mismatches == []
