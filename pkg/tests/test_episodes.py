"""Episode log round trips and defect reporting."""

from __future__ import annotations

import json

import pytest

from toolloop.errors import ConfigError, EpisodeLogError
from toolloop.rollout import (
    EpisodeRecord,
    RolloutLimits,
    Task,
    read_episodes,
    write_episodes,
)
from toolloop.tokenizer import ToyMergeTokenizer
from toolloop.trajectory import (
    ACTION,
    OBSERVATION,
    Trajectory,
    append_segment,
    terminate,
)


def make_record(task_id: str = "t0", reward: float = 1.0) -> EpisodeRecord:
    tok = ToyMergeTokenizer()
    traj = Trajectory()
    action = "<calc>1+1</calc>"
    append_segment(traj, ACTION, action, tok.encode(action))
    append_segment(traj, OBSERVATION, "2", tok.encode("2"))
    final = "<answer>2</answer>"
    append_segment(traj, ACTION, final, tok.encode(final))
    terminate(traj, "answer")
    n0 = len(traj.segments[0].tokens)
    n2 = len(traj.segments[2].tokens)
    return EpisodeRecord(
        task_id=task_id,
        policy_id="scripted",
        trajectory=traj,
        timings=[{"gen_ms": 1.5}, {"tool_ms": 0.4}, {"gen_ms": 2.0}],
        reward=reward,
        reward_breakdown={"match": reward},
        limits=RolloutLimits(max_turns=4),
        answer="2",
        prompt_tokens=7,
        action_logprobs=[[-0.1] * n0, [-0.2] * n2],
    )


def test_round_trip_preserves_everything(tmp_path):
    records = [make_record("a", 1.0), make_record("b", -1.0)]
    path = tmp_path / "episodes.jsonl"
    write_episodes(path, records)
    loaded = read_episodes(path)
    assert len(loaded) == 2
    for before, after in zip(records, loaded):
        assert after.to_dict() == before.to_dict()


def test_log_is_one_json_object_per_line(tmp_path):
    path = tmp_path / "episodes.jsonl"
    write_episodes(path, [make_record("a"), make_record("b")])
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    for line in lines:
        assert json.loads(line)["policy_id"] == "scripted"


def test_corrupted_line_cites_its_number(tmp_path):
    path = tmp_path / "episodes.jsonl"
    write_episodes(path, [make_record("a")])
    with path.open("a", encoding="utf-8") as fh:
        fh.write("{not json\n")
    with pytest.raises(EpisodeLogError, match=r":2"):
        read_episodes(path)


def test_missing_field_cites_line(tmp_path):
    good = make_record("a").to_dict()
    bad = make_record("b").to_dict()
    del bad["reward"]
    path = tmp_path / "episodes.jsonl"
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(good) + "\n")
        fh.write(json.dumps(bad) + "\n")
        fh.write(json.dumps(good) + "\n")
    with pytest.raises(EpisodeLogError, match=r":2"):
        read_episodes(path)


def test_timing_misalignment_rejected(tmp_path):
    data = make_record().to_dict()
    data["timings"] = data["timings"][:-1]
    path = tmp_path / "episodes.jsonl"
    path.write_text(json.dumps(data) + "\n", encoding="utf-8")
    with pytest.raises(EpisodeLogError, match=r":1"):
        read_episodes(path)


def test_blank_lines_skipped(tmp_path):
    path = tmp_path / "episodes.jsonl"
    record = make_record()
    path.write_text(
        json.dumps(record.to_dict()) + "\n\n" + json.dumps(record.to_dict()) + "\n",
        encoding="utf-8",
    )
    assert len(read_episodes(path)) == 2


def test_broken_alternation_rejected(tmp_path):
    data = make_record().to_dict()
    data["trajectory"]["segments"][1]["origin"] = "action"
    path = tmp_path / "episodes.jsonl"
    path.write_text(json.dumps(data) + "\n", encoding="utf-8")
    with pytest.raises(EpisodeLogError, match=r":1"):
        read_episodes(path)


def test_limits_validate():
    with pytest.raises(ConfigError):
        RolloutLimits(max_turns=0)
    with pytest.raises(ConfigError):
        RolloutLimits(max_response_tokens=-5)
    limits = RolloutLimits()
    assert RolloutLimits.from_dict(limits.to_dict()) == limits


def test_task_defaults():
    task = Task("id", "prompt")
    assert task.gold is None
    assert task.extra == {}
