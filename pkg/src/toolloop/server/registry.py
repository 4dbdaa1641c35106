"""Tool plugin registry with suffix-free stop-string routing."""

from __future__ import annotations

from typing import TYPE_CHECKING, Iterable, Iterator

from ..errors import DuplicateToolId, UnknownTool
from ..trajectory import StopTokenSet, detect_stop, validate_suffix_free

if TYPE_CHECKING:
    from ..plugins.base import ToolPlugin


class ToolRegistry:
    """Plugins keyed by tool id; routing goes through the stop-string union.

    Registration validates that the union of all stop strings stays
    suffix-free, which is what makes detect_stop unambiguous. The registry is
    meant to be fully populated at startup and treated as read-only afterward.
    """

    def __init__(self, plugins: Iterable["ToolPlugin"] = ()):
        self._plugins: dict[str, "ToolPlugin"] = {}
        for plugin in plugins:
            self.register(plugin)

    def register(self, plugin: "ToolPlugin") -> None:
        if plugin.tool_id in self._plugins:
            raise DuplicateToolId(f"tool {plugin.tool_id!r} already registered")
        validate_suffix_free(
            [p.stop_token_set for p in self._plugins.values()] + [plugin.stop_token_set]
        )
        self._plugins[plugin.tool_id] = plugin

    def get(self, tool_id: str) -> "ToolPlugin":
        try:
            return self._plugins[tool_id]
        except KeyError:
            raise UnknownTool(f"no tool registered as {tool_id!r}") from None

    def stop_sets(self) -> list[StopTokenSet]:
        return [p.stop_token_set for p in self._plugins.values()]

    def route(self, action_text: str) -> tuple[str, str] | None:
        """(tool_id, stop) for the stop string the action ends with, if any."""
        return detect_stop(action_text, self.stop_sets())

    def tool_ids(self) -> list[str]:
        return list(self._plugins)

    def __iter__(self) -> Iterator["ToolPlugin"]:
        return iter(self._plugins.values())

    def __len__(self) -> int:
        return len(self._plugins)
