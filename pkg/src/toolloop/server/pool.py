"""Bounded thread pool with a per-call watchdog and an in-flight gauge."""

from __future__ import annotations

import threading
from concurrent.futures import Future, ThreadPoolExecutor
from typing import Any, Callable, Literal

WatchdogStatus = Literal["ok", "timeout", "error"]


def run_with_watchdog(
    fn: Callable[[], Any], timeout_s: float
) -> tuple[WatchdogStatus, Any]:
    """Run fn in a side thread; give up after timeout_s.

    Returns ("ok", result), ("timeout", None), or ("error", exception). A
    timed-out call keeps running in its abandoned daemon thread; the caller
    must treat its effects as lost (the env store's copy-on-load/commit
    discipline makes that safe for env state).
    """
    box: dict[str, Any] = {}

    def runner() -> None:
        try:
            box["value"] = fn()
        except BaseException as exc:  # noqa: BLE001 - reported to caller
            box["error"] = exc

    thread = threading.Thread(target=runner, daemon=True)
    thread.start()
    thread.join(timeout_s)
    if thread.is_alive():
        return "timeout", None
    if "error" in box:
        return "error", box["error"]
    return "ok", box["value"]


class WorkerPool:
    """At most max_concurrent tool executions in flight; the rest queue."""

    def __init__(self, max_concurrent: int, per_call_timeout_ms: int, slack_ms: int = 250):
        if max_concurrent < 1:
            raise ValueError("max_concurrent must be positive")
        if per_call_timeout_ms < 1:
            raise ValueError("per_call_timeout_ms must be positive")
        self.max_concurrent = max_concurrent
        self.per_call_timeout_ms = per_call_timeout_ms
        self.slack_ms = slack_ms
        self._executor = ThreadPoolExecutor(
            max_workers=max_concurrent, thread_name_prefix="tool-worker"
        )
        self._mu = threading.Lock()
        self._in_flight = 0
        self._peak = 0

    @property
    def timeout_s(self) -> float:
        return self.per_call_timeout_ms / 1000.0

    def submit(self, fn: Callable[..., Any], *args: Any) -> Future:
        def gauged() -> Any:
            with self._mu:
                self._in_flight += 1
                self._peak = max(self._peak, self._in_flight)
            try:
                return fn(*args)
            finally:
                with self._mu:
                    self._in_flight -= 1

        return self._executor.submit(gauged)

    @property
    def in_flight(self) -> int:
        with self._mu:
            return self._in_flight

    @property
    def peak_in_flight(self) -> int:
        with self._mu:
            return self._peak

    def reset_peak(self) -> None:
        with self._mu:
            self._peak = self._in_flight

    def shutdown(self, wait: bool = True) -> None:
        """Drain: queued and in-flight work finishes before return when wait=True."""
        self._executor.shutdown(wait=wait)
