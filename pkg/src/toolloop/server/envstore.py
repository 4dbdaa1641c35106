"""Per-trajectory tool state, keyed by (trajectory_id, tool_id).

The store hands out deep copies and adopts them back on update. An execution
that is abandoned at timeout therefore mutates only its private copy; the
stored state changes exactly when an execution commits. Values in ``data``
must be plain copyable types (paths, numbers, strings, lists, dicts).
"""

from __future__ import annotations

import copy
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable

from ..errors import UnknownEnv


@dataclass
class EnvState:
    trajectory_id: str
    tool_id: str
    data: dict[str, Any] = field(default_factory=dict)
    created_at: float = 0.0
    last_used: float = 0.0


class EnvStore:
    """Thread-safe map of live tool environments plus per-trajectory locks."""

    def __init__(self) -> None:
        self._mu = threading.Lock()
        self._envs: dict[tuple[str, str], EnvState] = {}
        self._traj_locks: dict[str, threading.RLock] = {}

    def trajectory_lock(self, trajectory_id: str) -> threading.RLock:
        """Mutual exclusion for all tool work of one trajectory."""
        with self._mu:
            lock = self._traj_locks.get(trajectory_id)
            if lock is None:
                lock = self._traj_locks[trajectory_id] = threading.RLock()
            return lock

    def load(
        self,
        trajectory_id: str,
        tool_id: str,
        initializer: Callable[[str], dict[str, Any]],
    ) -> EnvState:
        """Return a copy of the stored env, initializing it on first use.

        The caller must hold the trajectory lock, which makes the
        check-then-initialize sequence race-free per trajectory.
        """
        key = (trajectory_id, tool_id)
        with self._mu:
            existing = self._envs.get(key)
        if existing is None:
            now = time.time()
            existing = EnvState(trajectory_id, tool_id, initializer(trajectory_id), now, now)
            with self._mu:
                self._envs[key] = existing
        return copy.deepcopy(existing)

    def update(self, env: EnvState) -> None:
        """Adopt a mutated env copy. Raises UnknownEnv after deletion."""
        key = (env.trajectory_id, env.tool_id)
        env.last_used = time.time()
        with self._mu:
            if key not in self._envs:
                raise UnknownEnv(f"env {key} was deleted")
            self._envs[key] = copy.deepcopy(env)

    def delete(self, trajectory_id: str) -> list[EnvState]:
        """Remove every env of the trajectory; returns them for teardown. Idempotent."""
        with self._mu:
            keys = [k for k in self._envs if k[0] == trajectory_id]
            return [self._envs.pop(k) for k in keys]

    def peek(self, trajectory_id: str, tool_id: str) -> EnvState | None:
        with self._mu:
            env = self._envs.get((trajectory_id, tool_id))
        return copy.deepcopy(env) if env is not None else None

    def __len__(self) -> int:
        with self._mu:
            return len(self._envs)
