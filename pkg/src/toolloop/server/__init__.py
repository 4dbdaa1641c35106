"""Unified tool server: registry, env store, bounded worker pool, batch API."""

from .envstore import EnvState, EnvStore
from .pool import WorkerPool
from .registry import ToolRegistry
from .service import ToolRequest, ToolResponse, ToolServer

__all__ = [
    "EnvState",
    "EnvStore",
    "ToolRegistry",
    "ToolRequest",
    "ToolResponse",
    "ToolServer",
    "WorkerPool",
]
