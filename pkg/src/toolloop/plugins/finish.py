"""Answer tool: terminates the episode, carrying the final answer in the action."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ..server.envstore import EnvState
from .base import ToolPlugin, ToolResult, extract_tag


def finish_parse(action_text: str) -> str | None:
    """Trimmed payload of the trailing <answer> tag, or None without one."""
    return extract_tag(action_text, "answer")


class FinishTool(ToolPlugin):
    tool_id = "finish"
    stop_strings = ("</answer>",)

    def parse_action(self, action_text: str) -> str | None:
        return finish_parse(action_text)

    def conduct_action(self, env: "EnvState", tool_input: str) -> ToolResult:
        return ToolResult("", valid=True, done=True)
