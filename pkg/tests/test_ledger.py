from __future__ import annotations

import json
import math
import random
import statistics

import pytest

from futureworld.domain import Outcome, TrajectoryStatus, dumps_canonical
from futureworld.ledger import (
    ConflictingOutcomeError,
    DuplicateTrajectoryError,
    LedgerError,
    ReplayError,
    TrajectoryLedger,
    compute_group_advantages,
    replay,
    write_training_batch,
)
from futureworld.rollout import ROLE_AGENT, ROLE_ENVIRONMENT, ROLE_TOOL, Turn
from futureworld.scoring import trajectory_reward

from conftest import T0, T1, make_step, make_trajectory


def _transcript(t):
    turns = [Turn(ROLE_ENVIRONMENT, "prompt text")]
    for step in t.steps:
        turns.append(Turn(ROLE_AGENT, step.action))
        turns.append(Turn(ROLE_TOOL, step.observation))
    if t.raw_final_answer:
        turns.append(Turn(ROLE_AGENT, t.raw_final_answer))
    return turns


def _append(ledger, t):
    return ledger.append_prefix(t, _transcript(t))


def _group(ledger, qid="q-1", probs=(0.5, 0.9, None, 1.0)):
    for k, prob in enumerate(probs):
        _append(ledger, make_trajectory(tid=f"{qid}#k{k}", qid=qid, k=k, prob=prob))


OUTCOME = Outcome(question_id="q-1", label=1, resolved_at=T1)


# -- append_prefix -------------------------------------------------------------


def test_append_and_fetch(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    seq = _append(ledger, make_trajectory())
    assert seq == 1
    assert ledger.get("q-1#k0").status is TrajectoryStatus.PENDING
    assert ledger.questions_for_day(T0.date()) == ["q-1"]


def test_duplicate_append_rejected(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    _append(ledger, make_trajectory())
    with pytest.raises(DuplicateTrajectoryError):
        _append(ledger, make_trajectory())


def test_resolved_trajectory_rejected_at_append(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    resolved = make_trajectory().resolved(1, -0.25)
    with pytest.raises(LedgerError):
        _append(ledger, resolved)


def test_batch_append_assigns_increasing_sequence(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    batch = [
        (make_trajectory(tid=f"q-1#k{k}", k=k), _transcript(make_trajectory(tid=f"q-1#k{k}", k=k)))
        for k in range(4)
    ]
    assert ledger.append_prefix_batch(batch) == [1, 2, 3, 4]


# -- backfill ---------------------------------------------------------------------


def test_backfill_writes_negative_brier_rewards(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    _group(ledger)
    count = ledger.backfill("q-1", OUTCOME, trajectory_reward)
    assert count == 4
    rewards = [ledger.get(f"q-1#k{k}").reward for k in range(4)]
    assert rewards == pytest.approx([-0.25, -0.01 + 1e-17, -1.0, 0.0], abs=1e-12)
    assert all(ledger.get(f"q-1#k{k}").label == 1 for k in range(4))


def test_backfill_is_idempotent(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    _group(ledger)
    assert ledger.backfill("q-1", OUTCOME, trajectory_reward) == 4
    before = [ledger.get(f"q-1#k{k}") for k in range(4)]
    assert ledger.backfill("q-1", OUTCOME, trajectory_reward) == 0
    assert [ledger.get(f"q-1#k{k}") for k in range(4)] == before


def test_conflicting_backfill_rejected(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    _group(ledger)
    ledger.backfill("q-1", OUTCOME, trajectory_reward)
    flipped = Outcome(question_id="q-1", label=0, resolved_at=T1)
    with pytest.raises(ConflictingOutcomeError):
        ledger.backfill("q-1", flipped, trajectory_reward)


def test_backfill_unknown_question_is_an_error(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    with pytest.raises(LedgerError):
        ledger.backfill("q-none", OUTCOME, trajectory_reward)


# -- discard -----------------------------------------------------------------------


def test_discard_unresolved_question(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    _group(ledger)
    assert ledger.discard("q-1", "not_published", T1) == 4
    assert all(ledger.get(f"q-1#k{k}").status is TrajectoryStatus.DISCARDED for k in range(4))
    assert ledger.discard("q-1", "not_published", T1) == 0


def test_discard_leaves_resolved_untouched(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    _group(ledger)
    ledger.backfill("q-1", OUTCOME, trajectory_reward)
    assert ledger.discard("q-1", "late", T1) == 0
    assert all(ledger.get(f"q-1#k{k}").status is TrajectoryStatus.RESOLVED for k in range(4))


# -- advantages ----------------------------------------------------------------------


def test_advantages_zero_variance_case():
    assert compute_group_advantages([-0.25, -0.25, -0.25, -0.25]) == [0.0, 0.0, 0.0, 0.0]


def test_advantages_two_point_case():
    adv = compute_group_advantages([0.0, -1.0])
    assert adv == pytest.approx([1.0, -1.0])


def test_advantages_single_sample():
    assert compute_group_advantages([-0.7]) == [0.0]
    with pytest.raises(ValueError):
        compute_group_advantages([])


def test_advantages_standardize_exactly():
    rng = random.Random(21)
    for _ in range(300):
        k = rng.randrange(2, 9)
        rewards = [-((round(rng.random(), 2) - rng.randrange(2)) ** 2) for _ in range(k)]
        adv = compute_group_advantages(rewards)
        if max(rewards) == min(rewards):
            assert adv == [0.0] * k
            continue
        assert math.fsum(adv) == pytest.approx(0.0, abs=1e-9)
        mean = math.fsum(adv) / k
        pop_std = math.sqrt(math.fsum((a - mean) ** 2 for a in adv) / k)
        assert pop_std == pytest.approx(1.0, abs=1e-6)


# -- export ------------------------------------------------------------------------------


def test_export_groups_only_resolved(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    _group(ledger, "q-1")
    _group(ledger, "q-2")
    _group(ledger, "q-3")
    ledger.backfill("q-1", OUTCOME, trajectory_reward)
    ledger.backfill("q-2", Outcome(question_id="q-2", label=0, resolved_at=T1), trajectory_reward)
    ledger.discard("q-3", "not_published", T1)
    groups = ledger.export_training_batch(T0.date())
    assert sorted(g.question_id for g in groups) == ["q-1", "q-2"]
    for group in groups:
        assert len(group.entries) == 4
        assert all(-1.0 <= e.reward <= 0.0 for e in group.entries)
        assert math.fsum(e.advantage for e in group.entries) == pytest.approx(0.0, abs=1e-9)
        for entry in group.entries:
            spans = entry.mask_spans
            assert [s.turn_index for s in spans] == list(range(len(entry.transcript)))
            for span, turn in zip(spans, entry.transcript):
                assert span.masked == (turn.role != ROLE_AGENT)


def test_export_mask_covers_two_search_turns(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    steps = (make_step("first"), make_step("second"))
    t = make_trajectory(steps=steps, prob=0.7)
    _append(ledger, t)
    ledger.backfill("q-1", OUTCOME, trajectory_reward)
    group = ledger.export_training_batch(T0.date())[0]
    entry = group.entries[0]
    roles = [turn.role for turn in entry.transcript]
    assert roles == [ROLE_ENVIRONMENT, ROLE_AGENT, ROLE_TOOL, ROLE_AGENT, ROLE_TOOL, ROLE_AGENT]
    masked = [span.masked for span in entry.mask_spans]
    assert masked == [True, False, True, False, True, False]


def test_export_rewards_recompute_from_stored_fields(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    _group(ledger)
    ledger.backfill("q-1", OUTCOME, trajectory_reward)
    for group in ledger.export_training_batch(T0.date()):
        for entry in group.entries:
            t = ledger.get(entry.trajectory_id)
            if t.final_probability is None:
                assert entry.reward == -1.0
            else:
                assert entry.reward == pytest.approx(-((t.final_probability - group.label) ** 2))


def test_export_partial_groups_keep_invalid_rollouts(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    _group(ledger, probs=(None, 0.9))
    ledger.backfill("q-1", OUTCOME, trajectory_reward)
    group = ledger.export_training_batch(T0.date())[0]
    assert len(group.entries) == 2
    rewards = sorted(e.reward for e in group.entries)
    assert rewards[0] == -1.0
    assert rewards[1] == pytest.approx(-0.01, abs=1e-12)


def test_write_training_batch_jsonl(tmp_path):
    ledger = TrajectoryLedger(tmp_path / "led")
    _group(ledger)
    ledger.backfill("q-1", OUTCOME, trajectory_reward)
    out = tmp_path / "train.jsonl"
    write_training_batch(out, ledger.export_training_batch(T0.date()))
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(rows) == 1
    assert rows[0]["question_id"] == "q-1"
    assert len(rows[0]["trajectories"]) == 4
    assert {"transcript", "mask_spans", "reward", "advantage"} <= set(rows[0]["trajectories"][0])


# -- replay --------------------------------------------------------------------------------


def _ledger_states_equal(a: TrajectoryLedger, b: TrajectoryLedger) -> bool:
    ids = sorted(t.trajectory_id for t in a.all_trajectories())
    if ids != sorted(t.trajectory_id for t in b.all_trajectories()):
        return False
    return all(a.get(i) == b.get(i) and a.transcript(i) == b.transcript(i) for i in ids)


def test_replay_reconstructs_live_state(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    _group(ledger, "q-1")
    _group(ledger, "q-2")
    ledger.backfill("q-1", OUTCOME, trajectory_reward)
    ledger.discard("q-2", "not_published", T1)
    replayed = replay(tmp_path)
    assert _ledger_states_equal(ledger, replayed)


def test_replay_of_truncated_log_is_a_valid_prefix(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    _group(ledger, "q-1")
    ledger.backfill("q-1", OUTCOME, trajectory_reward)
    log = next(tmp_path.glob("ledger-*.jsonl"))
    lines = log.read_text().splitlines()
    log.write_text("\n".join(lines[:5]) + "\n")
    replayed = replay(tmp_path)
    assert len(replayed.all_trajectories()) == 4
    statuses = {t.status for t in replayed.all_trajectories()}
    assert statuses == {TrajectoryStatus.RESOLVED, TrajectoryStatus.PENDING}


def test_replay_tolerates_torn_final_line(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    _group(ledger, "q-1")
    log = next(tmp_path.glob("ledger-*.jsonl"))
    with log.open("a") as fh:
        fh.write('{"sequence_no": 99, "kind": "BACK')  # crashed writer
    replayed = replay(tmp_path)
    assert len(replayed.all_trajectories()) == 4


def test_replay_rejects_backfill_before_prefix(tmp_path):
    log = tmp_path / f"ledger-{T0.date().isoformat()}.jsonl"
    record = {
        "sequence_no": 1,
        "kind": "BACKFILL",
        "trajectory_id": "q-9#k0",
        "payload": {"label": 1, "reward": -0.5, "resolved_at": "2026-03-03T20:30:00+00:00"},
    }
    log.write_text(dumps_canonical(record) + "\n")
    with pytest.raises(ReplayError) as err:
        replay(tmp_path)
    assert err.value.sequence_no == 1


def test_replay_rejects_double_terminal(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    _group(ledger, "q-1", probs=(0.5,))
    ledger.backfill("q-1", OUTCOME, trajectory_reward)
    log = next(tmp_path.glob("ledger-*.jsonl"))
    lines = log.read_text().splitlines()
    extra = json.loads(lines[-1])
    extra["sequence_no"] += 1
    extra["kind"] = "DISCARD"
    extra["payload"] = {"reason": "late", "decided_at": "2026-03-03T20:30:00+00:00"}
    log.write_text("\n".join(lines + [dumps_canonical(extra)]) + "\n")
    with pytest.raises(ReplayError):
        replay(tmp_path)


def test_replay_rejects_non_increasing_sequence(tmp_path):
    ledger = TrajectoryLedger(tmp_path)
    _group(ledger, "q-1", probs=(0.5, 0.6))
    log = next(tmp_path.glob("ledger-*.jsonl"))
    lines = log.read_text().splitlines()
    duplicated = json.loads(lines[-1])
    duplicated["trajectory_id"] = "q-1#k9"
    log.write_text("\n".join(lines + [dumps_canonical(duplicated)]) + "\n")
    with pytest.raises(ReplayError):
        replay(tmp_path)


# -- random interleaving property --------------------------------------------------------


def test_status_machine_over_random_interleavings(tmp_path):
    rng = random.Random(1312)
    for trial in range(25):
        root = tmp_path / f"trial{trial}"
        ledger = TrajectoryLedger(root)
        question_labels: dict[str, int] = {}
        next_k: dict[str, int] = {}
        for _ in range(40):
            action = rng.choice(("append", "backfill", "discard", "replay"))
            qid = f"q-{rng.randrange(5)}"
            if action == "append":
                k = next_k.get(qid, 0)
                if k >= 6:
                    continue
                next_k[qid] = k + 1
                prob = rng.choice([None, round(rng.random(), 2)])
                _append(ledger, make_trajectory(tid=f"{qid}#k{k}", qid=qid, k=k, prob=prob))
            elif action == "backfill" and qid in next_k:
                label = question_labels.setdefault(qid, rng.randrange(2))
                outcome = Outcome(question_id=qid, label=label, resolved_at=T1)
                first = ledger.backfill(qid, outcome, trajectory_reward)
                assert ledger.backfill(qid, outcome, trajectory_reward) == 0 or first == 0
            elif action == "discard" and qid in next_k:
                ledger.discard(qid, "not_published", T1)
            elif action == "replay":
                assert _ledger_states_equal(ledger, replay(root))

        # status machine: PENDING -> {RESOLVED, DISCARDED} only, enforced by replay
        replayed = replay(root)
        assert _ledger_states_equal(ledger, replayed)
        for group in ledger.export_training_batch(T0.date()):
            rewards = [e.reward for e in group.entries]
            assert all(-1.0 <= r <= 0.0 for r in rewards)
            labels = {ledger.get(e.trajectory_id).label for e in group.entries}
            assert labels == {group.label}
            advantages = [e.advantage for e in group.entries]
            if max(rewards) > min(rewards):
                mean = statistics.fmean(advantages)
                pop_std = math.sqrt(math.fsum((a - mean) ** 2 for a in advantages) / len(advantages))
                assert abs(mean) <= 1e-6
                assert abs(pop_std - 1.0) <= 1e-6
            else:
                assert advantages == [0.0] * len(advantages)
