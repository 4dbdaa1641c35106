"""Batch tool execution: routing, env lifecycle, timeouts, response alignment."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from ..errors import UnknownTool
from ..plugins.base import REQUEST_EXTRA_KEY, ToolResult
from ..textutil import cap_bytes
from .envstore import EnvStore
from .pool import WorkerPool, run_with_watchdog
from .registry import ToolRegistry

DEFAULT_OBS_BYTE_CAP = 8192


@dataclass
class ToolRequest:
    trajectory_id: str
    action_text: str
    extra: Mapping[str, Any] = field(default_factory=dict)
    finish: bool = False


@dataclass
class ToolResponse:
    observation: str
    valid: bool
    done: bool
    latency_ms: float = 0.0


class ToolServer:
    """Routes batched actions to plugins under the pool's concurrency bound.

    Responses are positionally aligned with requests no matter how executions
    interleave. Per-item failures (unroutable action, malformed payload, tool
    crash, timeout) are encoded in the response; the batch itself never fails.
    """

    def __init__(
        self,
        registry: ToolRegistry,
        store: EnvStore | None = None,
        pool: WorkerPool | None = None,
        *,
        obs_byte_cap: int = DEFAULT_OBS_BYTE_CAP,
    ):
        self.registry = registry
        self.store = store if store is not None else EnvStore()
        self.pool = pool if pool is not None else WorkerPool(8, 30_000)
        self.obs_byte_cap = obs_byte_cap

    def handle_batch(self, requests: Sequence[ToolRequest]) -> list[ToolResponse]:
        futures = [self.pool.submit(self.handle_one, req) for req in requests]
        return [f.result() for f in futures]

    def handle_one(self, req: ToolRequest) -> ToolResponse:
        start = time.perf_counter()

        def reply(observation: str, valid: bool, done: bool) -> ToolResponse:
            latency_ms = (time.perf_counter() - start) * 1000.0
            return ToolResponse(cap_bytes(observation, self.obs_byte_cap), valid, done, latency_ms)

        try:
            if not req.trajectory_id:
                return reply("Tool error: empty trajectory id", False, False)
            if req.finish:
                self.delete_env(req.trajectory_id)
                return reply("", True, True)
            route = self.registry.route(req.action_text)
            if route is None:
                return reply("", False, False)
            plugin = self.registry.get(route[0])
            payload = plugin.parse_action(req.action_text)
            if payload is None:
                return reply("", False, False)
            with self.store.trajectory_lock(req.trajectory_id):
                env = self.store.load(req.trajectory_id, plugin.tool_id, plugin.init_env)
                env.data[REQUEST_EXTRA_KEY] = dict(req.extra)
                status, value = run_with_watchdog(
                    lambda: plugin.conduct_action(env, payload), self.pool.timeout_s
                )
                if status == "ok":
                    result: ToolResult = value
                    env.data.pop(REQUEST_EXTRA_KEY, None)
                    self.store.update(env)
                    return reply(result.observation, result.valid, result.done)
                if status == "timeout":
                    return reply(
                        f"Tool call timed out after {self.pool.per_call_timeout_ms} ms.",
                        False,
                        False,
                    )
                return reply(f"Tool error: {value}", False, False)
        except Exception as exc:  # noqa: BLE001 - encoded per item, batch survives
            return reply(f"Tool error: {exc}", False, False)

    def delete_env(self, trajectory_id: str) -> None:
        """Drop all env state of a trajectory and run tool teardowns. Idempotent."""
        with self.store.trajectory_lock(trajectory_id):
            for env in self.store.delete(trajectory_id):
                try:
                    self.registry.get(env.tool_id).teardown_env(env)
                except UnknownTool:
                    pass

    def close(self) -> None:
        """Drain in-flight work and stop accepting new executions."""
        self.pool.shutdown(wait=True)
