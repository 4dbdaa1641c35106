"""Shell tool: runs a command in a private working directory per trajectory."""

from __future__ import annotations

import shutil
import subprocess
import tempfile
from pathlib import Path
from typing import Any

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ..server.envstore import EnvState
from ..textutil import cap_bytes
from .base import ToolPlugin, ToolResult, extract_tag

DEFAULT_OUTPUT_CAP = 4096


class ShellTool(ToolPlugin):
    tool_id = "shell"
    stop_strings = ("</shell>",)

    def __init__(self, spill_dir: Path, *, timeout_s: float = 10.0, output_cap: int = DEFAULT_OUTPUT_CAP):
        self.spill_dir = Path(spill_dir)
        self.timeout_s = timeout_s
        self.output_cap = output_cap

    def parse_action(self, action_text: str) -> str | None:
        return extract_tag(action_text, "shell")

    def init_env(self, trajectory_id: str) -> dict[str, Any]:
        self.spill_dir.mkdir(parents=True, exist_ok=True)
        workdir = tempfile.mkdtemp(prefix="shell-", dir=self.spill_dir)
        return {"workdir": workdir}

    def conduct_action(self, env: "EnvState", tool_input: str) -> ToolResult:
        if not tool_input.strip():
            return ToolResult("Error: empty command", valid=False)
        try:
            proc = subprocess.run(
                ["/bin/sh", "-c", tool_input],
                cwd=env.data["workdir"],
                capture_output=True,
                timeout=self.timeout_s,
            )
        except subprocess.TimeoutExpired:
            return ToolResult(
                f"Tool call timed out after {self.timeout_s:g} s.", valid=False
            )
        out = (proc.stdout + proc.stderr).decode("utf-8", errors="replace")
        out = cap_bytes(out, self.output_cap)
        if out and not out.endswith("\n"):
            out += "\n"
        return ToolResult(f"{out}(exit {proc.returncode})")

    def teardown_env(self, env: "EnvState") -> None:
        workdir = env.data.get("workdir")
        if workdir:
            shutil.rmtree(workdir, ignore_errors=True)
