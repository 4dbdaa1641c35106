"""Rollout layer: policies, episode records, and batch schedulers."""

from .client import HttpToolClient, LocalToolClient, ToolClient
from .episodes import (
    EpisodeRecord,
    RolloutLimits,
    Task,
    read_episodes,
    write_episodes,
)
from .orchestrator import (
    INVALID_ACTION_NOTICE,
    default_reward_fn,
    run_batch_async,
    run_batch_sync,
    run_trajectory,
)
from .policy import Policy, PolicyAction, RemotePolicy, ScriptedPolicy

__all__ = [
    "EpisodeRecord",
    "HttpToolClient",
    "INVALID_ACTION_NOTICE",
    "LocalToolClient",
    "Policy",
    "PolicyAction",
    "RemotePolicy",
    "RolloutLimits",
    "ScriptedPolicy",
    "Task",
    "ToolClient",
    "default_reward_fn",
    "read_episodes",
    "run_batch_async",
    "run_batch_sync",
    "run_trajectory",
    "write_episodes",
]
