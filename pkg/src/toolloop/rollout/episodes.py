"""Episode records and JSON-lines log persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import ConfigError, EpisodeLogError
from ..trajectory import Trajectory, trajectory_from_dict, trajectory_to_dict


@dataclass(frozen=True)
class RolloutLimits:
    """Token and turn budgets enforced while rolling out one trajectory."""

    max_turns: int = 6
    max_prompt_tokens: int = 4096
    max_response_tokens: int = 4096
    max_action_tokens: int = 1024
    max_obs_tokens: int = 2048

    def __post_init__(self) -> None:
        for name in (
            "max_turns",
            "max_prompt_tokens",
            "max_response_tokens",
            "max_action_tokens",
            "max_obs_tokens",
        ):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")

    def to_dict(self) -> dict[str, int]:
        return {
            "max_turns": self.max_turns,
            "max_prompt_tokens": self.max_prompt_tokens,
            "max_response_tokens": self.max_response_tokens,
            "max_action_tokens": self.max_action_tokens,
            "max_obs_tokens": self.max_obs_tokens,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RolloutLimits":
        return cls(**{k: data[k] for k in cls().to_dict() if k in data})


@dataclass(frozen=True)
class Task:
    """One rollout unit: a prompt plus whatever the reward needs later."""

    task_id: str
    prompt: str
    gold: str | None = None
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass
class EpisodeRecord:
    """Everything one finished trajectory leaves behind.

    ``timings`` is aligned with ``trajectory.segments``: action segments get
    ``{"gen_ms": x}`` and observation segments get ``{"tool_ms": y}``.
    ``action_logprobs`` holds one list per action segment, aligned with that
    segment's tokens, so a loss pass can run without a separate sidecar.
    """

    task_id: str
    policy_id: str
    trajectory: Trajectory
    timings: list[dict[str, float]]
    reward: float
    reward_breakdown: dict[str, float]
    limits: RolloutLimits
    answer: str | None = None
    prompt_tokens: int = 0
    action_logprobs: list[list[float]] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "policy_id": self.policy_id,
            "trajectory": trajectory_to_dict(self.trajectory),
            "timings": self.timings,
            "reward": self.reward,
            "reward_breakdown": self.reward_breakdown,
            "limits": self.limits.to_dict(),
            "answer": self.answer,
            "prompt_tokens": self.prompt_tokens,
            "action_logprobs": self.action_logprobs,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EpisodeRecord":
        traj = trajectory_from_dict(data["trajectory"])
        timings = [dict(t) for t in data["timings"]]
        if len(timings) != len(traj.segments):
            raise ValueError(
                f"timings has {len(timings)} entries for "
                f"{len(traj.segments)} segments"
            )
        logps = data.get("action_logprobs")
        if logps is not None:
            logps = [[float(x) for x in row] for row in logps]
        return cls(
            task_id=str(data["task_id"]),
            policy_id=str(data["policy_id"]),
            trajectory=traj,
            timings=timings,
            reward=float(data["reward"]),
            reward_breakdown={
                str(k): float(v) for k, v in data["reward_breakdown"].items()
            },
            limits=RolloutLimits.from_dict(data["limits"]),
            answer=data.get("answer"),
            prompt_tokens=int(data.get("prompt_tokens", 0)),
            action_logprobs=logps,
        )


def write_episodes(path: str | Path, records: list[EpisodeRecord]) -> None:
    """Write records as JSON lines, one record per line."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False))
            fh.write("\n")


def read_episodes(path: str | Path) -> list[EpisodeRecord]:
    """Read a JSON-lines episode log, citing the line number on any defect."""
    path = Path(path)
    records: list[EpisodeRecord] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                records.append(EpisodeRecord.from_dict(data))
            except EpisodeLogError:
                raise
            except Exception as exc:
                raise EpisodeLogError(f"{path}:{lineno}: {exc}") from exc
    return records
