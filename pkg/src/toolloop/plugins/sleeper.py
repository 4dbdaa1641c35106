"""Latency-stub tool for scheduler benchmarks: sleeps for the requested time."""

from __future__ import annotations

import time

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ..server.envstore import EnvState
from .base import ToolPlugin, ToolResult, extract_tag


class SleeperTool(ToolPlugin):
    tool_id = "sleep"
    stop_strings = ("</sleep>",)

    def __init__(self, max_sleep_s: float = 10.0):
        self.max_sleep_s = max_sleep_s

    def parse_action(self, action_text: str) -> str | None:
        return extract_tag(action_text, "sleep")

    def conduct_action(self, env: "EnvState", tool_input: str) -> ToolResult:
        try:
            seconds = float(tool_input)
        except ValueError:
            return ToolResult(f"Error: bad duration {tool_input!r}", valid=False)
        seconds = max(0.0, min(seconds, self.max_sleep_s))
        time.sleep(seconds)
        return ToolResult(f"slept {seconds:g}")
