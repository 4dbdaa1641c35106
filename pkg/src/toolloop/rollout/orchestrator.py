"""Rollout drivers: one trajectory at a time, or batches scheduled two ways.

The per-trajectory stepping logic lives in one place (_Stepper) and both
schedulers drive it, so a batch produces identical episodes either way and
only the wall-clock profile differs:

- run_batch_sync alternates phases: every live trajectory generates its next
  action, then all resulting tool calls go out as one batch. Each phase waits
  for its slowest member.
- run_batch_async gives each trajectory its own worker that generates and calls
  tools back to back, so no trajectory ever waits on another.
"""

from __future__ import annotations

import uuid
from concurrent.futures import ThreadPoolExecutor
from time import perf_counter
from typing import Callable, Sequence

from ..plugins.base import extract_tag
from ..rl.rewards import reward_match
from ..server.service import ToolRequest, ToolResponse
from ..tokenizer import Tokenizer
from ..trajectory import (
    ACTION,
    OBSERVATION,
    StopTokenSet,
    Trajectory,
    append_segment,
    detect_stop,
    terminate,
)
from .client import ToolClient
from .episodes import EpisodeRecord, RolloutLimits, Task
from .policy import Policy, PolicyAction

INVALID_ACTION_NOTICE = "Invalid action."

RewardFn = Callable[[str | None, Task, Trajectory], tuple[float, dict[str, float]]]


def default_reward_fn(
    answer: str | None, task: Task, traj: Trajectory
) -> tuple[float, dict[str, float]]:
    """Match the final answer against the task's gold string, if it has one."""
    if task.gold is None:
        return 0.0, {}
    value = reward_match(answer or "", task.gold)
    return value, {"match": value}


class _Stepper:
    """State machine for one episode; both schedulers feed it identically."""

    def __init__(
        self,
        policy: Policy,
        task: Task,
        limits: RolloutLimits,
        tokenizer: Tokenizer,
        stop_sets: Sequence[StopTokenSet],
        reward_fn: RewardFn,
        answer_tools: frozenset[str],
        answer_tag: str,
    ) -> None:
        self.policy = policy
        self.task = task
        self.limits = limits
        self.tokenizer = tokenizer
        self.stop_sets = tuple(stop_sets)
        self.stop_strings = tuple(s for ss in self.stop_sets for s in ss.stops)
        self.reward_fn = reward_fn
        self.answer_tools = answer_tools
        self.answer_tag = answer_tag

        self.trajectory_id = uuid.uuid4().hex
        self.traj = Trajectory()
        self.timings: list[dict[str, float]] = []
        self.action_logprobs: list[list[float]] = []
        self.answer: str | None = None
        self.error: BaseException | None = None
        self._routed_tool: str | None = None
        self._last_action_text = ""
        self._response_tokens = 0

        prompt_tokens = tokenizer.encode(task.prompt)
        if len(prompt_tokens) > limits.max_prompt_tokens:
            prompt_tokens = prompt_tokens[: limits.max_prompt_tokens]
            self.prompt = tokenizer.decode(prompt_tokens)
        else:
            self.prompt = task.prompt
        self.prompt_token_count = len(prompt_tokens)

    @property
    def terminated(self) -> bool:
        return self.traj.terminated

    def prompt_for_policy(self) -> str:
        return self.prompt + self.traj.text()

    def feed_action(self, action: PolicyAction, gen_ms: float) -> ToolRequest | None:
        """Record one policy output; return the tool call it implies, if any."""
        tokens = self.tokenizer.encode(action.text)
        logprobs = list(action.token_logprobs)
        if len(logprobs) != len(tokens):
            raise ValueError(
                f"policy returned {len(logprobs)} logprobs "
                f"for {len(tokens)} action tokens"
            )
        text = action.text
        budget = self.limits.max_response_tokens - self._response_tokens
        allowed = min(self.limits.max_action_tokens, budget)
        if len(tokens) > allowed:
            tokens = tokens[:allowed]
            logprobs = logprobs[:allowed]
            text = self.tokenizer.decode(tokens)
        append_segment(self.traj, ACTION, text, tokens)
        self.timings.append({"gen_ms": gen_ms})
        self.action_logprobs.append(logprobs)
        self._response_tokens += len(tokens)
        self._last_action_text = text

        if self._response_tokens >= self.limits.max_response_tokens:
            terminate(self.traj, "length_limit")
            return None
        route = detect_stop(text, self.stop_sets)
        if route is None:
            self.answer = text.strip()
            terminate(self.traj, "answer")
            return None
        self._routed_tool = route[0]
        if self.traj.turn_count >= self.limits.max_turns:
            terminate(self.traj, "max_turns")
            return None
        return ToolRequest(
            trajectory_id=self.trajectory_id,
            action_text=text,
            extra=dict(self.task.extra),
        )

    def feed_response(self, resp: ToolResponse) -> None:
        if resp.done:
            if self._routed_tool in self.answer_tools:
                parsed = extract_tag(self._last_action_text, self.answer_tag)
                self.answer = (
                    parsed if parsed is not None else self._last_action_text.strip()
                )
                terminate(self.traj, "answer")
            else:
                terminate(self.traj, "tool_done")
            return
        text = resp.observation
        if not resp.valid and not text:
            text = INVALID_ACTION_NOTICE
        budget = self.limits.max_response_tokens - self._response_tokens
        allowed = min(self.limits.max_obs_tokens, budget - 1)
        tokens = self.tokenizer.encode(text)
        if len(tokens) > allowed:
            tokens = tokens[:allowed]
            text = self.tokenizer.decode(tokens)
        append_segment(self.traj, OBSERVATION, text, tokens)
        self.timings.append({"tool_ms": resp.latency_ms})
        self._response_tokens += len(tokens)

    def mark_error(self, exc: BaseException) -> None:
        self.error = exc
        if not self.traj.terminated:
            terminate(self.traj, "error")

    def finalize(self, client: ToolClient) -> EpisodeRecord:
        try:
            client.finish(self.trajectory_id)
        except Exception:
            pass
        if self.error is not None:
            reward, breakdown = 0.0, {}
        else:
            reward, breakdown = self.reward_fn(self.answer, self.task, self.traj)
        return EpisodeRecord(
            task_id=self.task.task_id,
            policy_id=self.policy.policy_id,
            trajectory=self.traj,
            timings=self.timings,
            reward=float(reward),
            reward_breakdown=dict(breakdown),
            limits=self.limits,
            answer=self.answer,
            prompt_tokens=self.prompt_token_count,
            action_logprobs=list(self.action_logprobs),
        )


def _generate_and_feed(stepper: _Stepper) -> ToolRequest | None:
    prompt = stepper.prompt_for_policy()
    start = perf_counter()
    action = stepper.policy.next_action(prompt, stepper.traj, stepper.stop_strings)
    gen_ms = (perf_counter() - start) * 1000.0
    return stepper.feed_action(action, gen_ms)


def _drive_one(stepper: _Stepper, client: ToolClient) -> None:
    try:
        while not stepper.terminated:
            req = _generate_and_feed(stepper)
            if req is None:
                continue
            resp = client.call_batch([req])[0]
            stepper.feed_response(resp)
    except Exception as exc:
        stepper.mark_error(exc)


def _normalize_policies(
    policies: Policy | Sequence[Policy], count: int
) -> list[Policy]:
    if hasattr(policies, "next_action"):
        return [policies] * count  # type: ignore[list-item]
    policy_list = list(policies)  # type: ignore[arg-type]
    if len(policy_list) != count:
        raise ValueError(f"{len(policy_list)} policies for {count} tasks")
    return policy_list


def _build_steppers(
    policies: Policy | Sequence[Policy],
    tasks: Sequence[Task],
    limits: RolloutLimits,
    tokenizer: Tokenizer,
    stop_sets: Sequence[StopTokenSet] | None,
    client: ToolClient,
    reward_fn: RewardFn,
    answer_tools: frozenset[str],
    answer_tag: str,
) -> list[_Stepper]:
    if stop_sets is None:
        stop_sets = client.stop_sets
    policy_list = _normalize_policies(policies, len(tasks))
    return [
        _Stepper(
            policy, task, limits, tokenizer, stop_sets,
            reward_fn, answer_tools, answer_tag,
        )
        for policy, task in zip(policy_list, tasks)
    ]


def run_trajectory(
    policy: Policy,
    client: ToolClient,
    limits: RolloutLimits,
    task: Task,
    *,
    tokenizer: Tokenizer,
    stop_sets: Sequence[StopTokenSet] | None = None,
    reward_fn: RewardFn = default_reward_fn,
    answer_tools: frozenset[str] = frozenset({"finish"}),
    answer_tag: str = "answer",
) -> EpisodeRecord:
    """Roll one task to completion and return its episode record."""
    (stepper,) = _build_steppers(
        policy, [task], limits, tokenizer, stop_sets,
        client, reward_fn, answer_tools, answer_tag,
    )
    _drive_one(stepper, client)
    return stepper.finalize(client)


def run_batch_sync(
    policies: Policy | Sequence[Policy],
    tasks: Sequence[Task],
    limits: RolloutLimits,
    client: ToolClient,
    *,
    tokenizer: Tokenizer,
    stop_sets: Sequence[StopTokenSet] | None = None,
    reward_fn: RewardFn = default_reward_fn,
    answer_tools: frozenset[str] = frozenset({"finish"}),
    answer_tag: str = "answer",
) -> tuple[list[EpisodeRecord], float]:
    """Phase-synchronous batch rollout.

    Per round, every live trajectory generates its action (concurrently),
    then all implied tool calls go out as a single batch. Returns the episode
    records in task order plus the wall-clock seconds the batch took.
    """
    steppers = _build_steppers(
        policies, tasks, limits, tokenizer, stop_sets,
        client, reward_fn, answer_tools, answer_tag,
    )
    start = perf_counter()
    if steppers:
        with ThreadPoolExecutor(max_workers=len(steppers)) as pool:
            while True:
                live = [s for s in steppers if not s.terminated]
                if not live:
                    break
                futures = [(s, pool.submit(_generate_and_feed, s)) for s in live]
                pending: list[tuple[_Stepper, ToolRequest]] = []
                for s, fut in futures:
                    try:
                        req = fut.result()
                    except Exception as exc:
                        s.mark_error(exc)
                        continue
                    if req is not None:
                        pending.append((s, req))
                if not pending:
                    continue
                try:
                    responses = client.call_batch([req for _, req in pending])
                except Exception as exc:
                    for s, _ in pending:
                        s.mark_error(exc)
                    continue
                for (s, _), resp in zip(pending, responses):
                    try:
                        s.feed_response(resp)
                    except Exception as exc:
                        s.mark_error(exc)
    records = [s.finalize(client) for s in steppers]
    return records, perf_counter() - start


def run_batch_async(
    policies: Policy | Sequence[Policy],
    tasks: Sequence[Task],
    limits: RolloutLimits,
    client: ToolClient,
    *,
    tokenizer: Tokenizer,
    stop_sets: Sequence[StopTokenSet] | None = None,
    reward_fn: RewardFn = default_reward_fn,
    answer_tools: frozenset[str] = frozenset({"finish"}),
    answer_tag: str = "answer",
    max_parallel: int | None = None,
) -> tuple[list[EpisodeRecord], float]:
    """Independent per-trajectory rollout.

    Each trajectory runs generate/tool/generate back to back on its own
    worker; up to ``max_parallel`` trajectories are in flight (defaults to
    the batch size). Returns records in task order plus wall-clock seconds.
    """
    steppers = _build_steppers(
        policies, tasks, limits, tokenizer, stop_sets,
        client, reward_fn, answer_tools, answer_tag,
    )
    if max_parallel is None:
        max_parallel = max(1, len(steppers))
    if max_parallel < 1:
        raise ValueError(f"max_parallel must be >= 1, got {max_parallel}")
    start = perf_counter()
    records: list[EpisodeRecord] = []
    if steppers:
        def run_one(s: _Stepper) -> EpisodeRecord:
            _drive_one(s, client)
            return s.finalize(client)

        with ThreadPoolExecutor(max_workers=max_parallel) as pool:
            records = list(pool.map(run_one, steppers))
    return records, perf_counter() - start
