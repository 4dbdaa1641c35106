"""Plugin interface all tools implement."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ..server.envstore import EnvState
from ..trajectory import StopTokenSet

# Key under which the server injects the request's extra fields into env.data
# before each conduct_action call. Plugins read it, never persist through it.
REQUEST_EXTRA_KEY = "_extra"


@dataclass
class ToolResult:
    observation: str
    valid: bool = True
    done: bool = False


class ToolPlugin(ABC):
    """One tool: its stop strings, payload parser, and executor.

    conduct_action may mutate env.data freely; the server serializes all calls
    of one trajectory and commits the mutation afterward. Plugins must be safe
    for concurrent calls on different trajectories' envs.
    """

    tool_id: str = ""
    stop_strings: tuple[str, ...] = ()

    @property
    def stop_token_set(self) -> StopTokenSet:
        return StopTokenSet(self.tool_id, self.stop_strings)

    @abstractmethod
    def parse_action(self, action_text: str) -> str | None:
        """Extract this tool's payload, or None when the action is not for it."""

    @abstractmethod
    def conduct_action(self, env: "EnvState", tool_input: str) -> ToolResult:
        """Execute the payload against the trajectory's env."""

    def init_env(self, trajectory_id: str) -> dict[str, Any]:
        """Initial env.data for a fresh trajectory."""
        return {}

    def teardown_env(self, env: "EnvState") -> None:
        """Release external resources (files, directories) held by the env."""


def extract_tag(text: str, tag: str) -> str | None:
    """Payload between the last <tag> and its closing </tag> suffix, trimmed.

    The action must end with the closing tag (possibly followed by nothing but
    whitespace); unpaired tags yield None.
    """
    close = f"</{tag}>"
    open_ = f"<{tag}>"
    stripped = text.rstrip()
    if not stripped.endswith(close):
        return None
    body_end = len(stripped) - len(close)
    start = stripped.rfind(open_, 0, body_end)
    if start < 0:
        return None
    return stripped[start + len(open_) : body_end].strip()
