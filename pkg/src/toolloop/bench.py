"""Sync-vs-async scheduling benchmark with a closed-form oracle.

A sampled latency trace drives both real schedulers (via a sleeping policy
and a sleeping tool), and the same trace feeds closed-form predictions of
each scheduler's wall clock. Sync pays the slowest member of every phase;
async only pays each trajectory's own path.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from typing import Any, Sequence

from .rollout import (
    LocalToolClient,
    RolloutLimits,
    ScriptedPolicy,
    Task,
    run_batch_async,
    run_batch_sync,
)
from .server import EnvStore, ToolRegistry, ToolServer, WorkerPool
from .plugins.finish import FinishTool
from .plugins.sleeper import SleeperTool
from .tokenizer import ToyMergeTokenizer

DEFAULT_BENCH_SEED = 12773


@dataclass(frozen=True)
class ScheduleTrace:
    """Sampled latencies: gen[i][t] and tool[i][t] seconds for trajectory i, turn t.

    Rows may have different lengths; a trajectory is active at turn t while
    its row still has entries, and inactive trajectories gate nothing.
    """

    gen: tuple[tuple[float, ...], ...]
    tool: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if len(self.gen) != len(self.tool):
            raise ValueError(
                f"gen has {len(self.gen)} rows, tool has {len(self.tool)}"
            )
        for i, (g, t) in enumerate(zip(self.gen, self.tool)):
            if len(g) != len(t):
                raise ValueError(f"trajectory {i}: {len(g)} gen vs {len(t)} tool entries")
            for x in (*g, *t):
                if x < 0:
                    raise ValueError(f"trajectory {i}: negative latency {x}")

    @property
    def batch_size(self) -> int:
        return len(self.gen)

    @property
    def max_turns(self) -> int:
        return max((len(row) for row in self.gen), default=0)


@dataclass(frozen=True)
class LatencyModel:
    """Uniform per-turn latency sampler, deterministic under its seed.

    Sampling order is fixed: the full gen matrix row by row, then the full
    tool matrix row by row, from one RNG.
    """

    gen_low: float = 0.2
    gen_high: float = 1.0
    tool_low: float = 0.1
    tool_high: float = 2.0
    seed: int = DEFAULT_BENCH_SEED

    def __post_init__(self) -> None:
        if not (0 <= self.gen_low <= self.gen_high):
            raise ValueError(f"bad gen range [{self.gen_low}, {self.gen_high}]")
        if not (0 <= self.tool_low <= self.tool_high):
            raise ValueError(f"bad tool range [{self.tool_low}, {self.tool_high}]")

    def sample(self, batch: int, turns: int) -> ScheduleTrace:
        rng = random.Random(self.seed)
        gen = tuple(
            tuple(rng.uniform(self.gen_low, self.gen_high) for _ in range(turns))
            for _ in range(batch)
        )
        tool = tuple(
            tuple(rng.uniform(self.tool_low, self.tool_high) for _ in range(turns))
            for _ in range(batch)
        )
        return ScheduleTrace(gen=gen, tool=tool)


def oracle_sync_time(trace: ScheduleTrace) -> float:
    """Predicted wall clock of the phase-synchronous scheduler.

    Each turn costs the slowest active generation plus the slowest active
    tool call, because every phase waits for its last member.
    """
    total = 0.0
    for t in range(trace.max_turns):
        active_gen = [row[t] for row in trace.gen if len(row) > t]
        active_tool = [row[t] for row in trace.tool if len(row) > t]
        if active_gen:
            total += max(active_gen) + max(active_tool)
    return total


def oracle_async_time(trace: ScheduleTrace, max_parallel: int | None = None) -> float:
    """Predicted wall clock of the per-trajectory scheduler.

    At full parallelism every trajectory runs its own path, so the batch
    takes the longest path. Under a slot bound the oracle assumes greedy
    list scheduling: trajectories in input order, each taken by the
    earliest-free slot.
    """
    totals = [
        sum(g) + sum(t) for g, t in zip(trace.gen, trace.tool)
    ]
    if not totals:
        return 0.0
    if max_parallel is None or max_parallel >= len(totals):
        return max(totals)
    if max_parallel < 1:
        raise ValueError(f"max_parallel must be >= 1, got {max_parallel}")
    slots = [0.0] * max_parallel
    heapq.heapify(slots)
    for total in totals:
        free_at = heapq.heappop(slots)
        heapq.heappush(slots, free_at + total)
    return max(slots)


def _workload(
    trace: ScheduleTrace, tokenizer: ToyMergeTokenizer
) -> tuple[ScriptedPolicy, list[Task]]:
    """Scripted policy + tasks that replay the trace through real components.

    Trajectory i sleeps gen[i][t] before emitting its turn-t action, whose
    sleep tool call takes tool[i][t]. After its last turn it answers with no
    delay, so the final generation adds only scheduling slack (the oracles
    ignore it).
    """
    script: dict[str, list[str]] = {}
    delays: dict[str, list[float]] = {}
    tasks: list[Task] = []
    for i, (gen_row, tool_row) in enumerate(zip(trace.gen, trace.tool)):
        prompt = f"bench-{i}"
        script[prompt] = [f"<sleep>{x!r}</sleep>" for x in tool_row]
        script[prompt].append("<answer>done</answer>")
        delays[prompt] = list(gen_row) + [0.0]
        tasks.append(Task(task_id=prompt, prompt=prompt))
    policy = ScriptedPolicy(script, tokenizer, policy_id="bench", delays=delays)
    return policy, tasks


def _make_client(batch: int) -> tuple[LocalToolClient, ToolServer]:
    registry = ToolRegistry()
    registry.register(FinishTool())
    registry.register(SleeperTool(max_sleep_s=60.0))
    pool = WorkerPool(max(1, batch), 300_000)
    server = ToolServer(registry, EnvStore(), pool)
    return LocalToolClient(server), server


def measure_trace(trace: ScheduleTrace) -> tuple[float, float]:
    """Run both schedulers over the trace; return (sync_s, async_s) wall clocks."""
    tokenizer = ToyMergeTokenizer()
    limits = RolloutLimits(
        max_turns=trace.max_turns + 1,
        max_response_tokens=1_000_000,
        max_action_tokens=100_000,
        max_obs_tokens=100_000,
    )
    policy, tasks = _workload(trace, tokenizer)

    client, server = _make_client(trace.batch_size)
    try:
        _, sync_s = run_batch_sync(policy, tasks, limits, client, tokenizer=tokenizer)
    finally:
        server.close()

    client, server = _make_client(trace.batch_size)
    try:
        _, async_s = run_batch_async(policy, tasks, limits, client, tokenizer=tokenizer)
    finally:
        server.close()
    return sync_s, async_s


def run_speedup_experiment(
    model: LatencyModel,
    batch: int,
    turns: int | Sequence[int],
    repeats: int = 1,
) -> dict[str, Any]:
    """Measure sync and async wall clocks against the oracle per turn count.

    Returns a report with one row per turn count: measured times (mean over
    ``repeats``), the two oracle predictions, the measured speedup, and each
    scheduler's relative error against its oracle.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    turn_list = [turns] if isinstance(turns, int) else list(turns)
    rows: list[dict[str, float]] = []
    for turn_count in turn_list:
        trace = model.sample(batch, turn_count)
        sync_total = 0.0
        async_total = 0.0
        for _ in range(repeats):
            sync_s, async_s = measure_trace(trace)
            sync_total += sync_s
            async_total += async_s
        sync_s = sync_total / repeats
        async_s = async_total / repeats
        o_sync = oracle_sync_time(trace)
        o_async = oracle_async_time(trace, batch)
        rows.append(
            {
                "turns": turn_count,
                "sync_s": sync_s,
                "async_s": async_s,
                "speedup": sync_s / async_s if async_s > 0 else float("inf"),
                "oracle_sync_s": o_sync,
                "oracle_async_s": o_async,
                "oracle_speedup": o_sync / o_async if o_async > 0 else float("inf"),
                "sync_rel_err": abs(sync_s - o_sync) / o_sync if o_sync > 0 else 0.0,
                "async_rel_err": abs(async_s - o_async) / o_async if o_async > 0 else 0.0,
            }
        )
    return {
        "seed": model.seed,
        "batch": batch,
        "gen_range": [model.gen_low, model.gen_high],
        "tool_range": [model.tool_low, model.tool_high],
        "repeats": repeats,
        "rows": rows,
    }


def format_report_markdown(report: dict[str, Any]) -> str:
    lines = [
        "| Turns | Sync (s) | Async (s) | Speed Up | Oracle Sync (s) | Oracle Async (s) |",
        "|------:|---------:|----------:|---------:|----------------:|-----------------:|",
    ]
    for row in report["rows"]:
        lines.append(
            f"| {row['turns']} | {row['sync_s']:.2f} | {row['async_s']:.2f} "
            f"| {row['speedup']:.2f} | {row['oracle_sync_s']:.2f} "
            f"| {row['oracle_async_s']:.2f} |"
        )
    return "\n".join(lines)
