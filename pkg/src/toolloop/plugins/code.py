"""Code interpreter tool backed by an external sandbox worker process.

The worker is stateless: it reads one JSON job line on stdin ({"code",
"timeout_s", "stdout_cap_bytes", optional "cwd"}), runs the code, and writes
one JSON result line ({"stdout", "stderr", "exit_status", "timed_out"}).
Session state lives in the env instead: every call replays the trajectory's
prior snippets with their stdout suppressed, then runs the new snippet, so
definitions persist across turns without a warm process.
"""

from __future__ import annotations

import json
import re
import shutil
import subprocess
import tempfile
from pathlib import Path
from typing import Any, Sequence

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ..server.envstore import EnvState
from ..textutil import cap_bytes
from .base import ToolPlugin, ToolResult, extract_tag

DEFAULT_OUTPUT_CAP = 4096

_FENCE = re.compile(r"```python\n(.*?)```", re.DOTALL)


def parse_code_action(action_text: str) -> str | None:
    """Code from a trailing <python> tag or the last ```python fence.

    The fence form is used when generation stopped at a "```output" opener;
    the code is whatever the last complete ```python block holds.
    """
    tagged = extract_tag(action_text, "python")
    if tagged is not None:
        return tagged
    if action_text.rstrip().endswith("```output"):
        blocks = _FENCE.findall(action_text)
        if blocks:
            return blocks[-1].rstrip("\n")
    return None


def build_program(prior: Sequence[str], code: str) -> str:
    """Replay prior snippets silently, then run the new one at top level."""
    if not prior:
        return code
    header = (
        "import contextlib as _ctx, io as _io, json as _json\n"
        f"_prior = _json.loads({json.dumps(json.dumps(list(prior)))})\n"
        "with _ctx.redirect_stdout(_io.StringIO()):\n"
        "    for _snippet in _prior:\n"
        "        exec(compile(_snippet, '<prior>', 'exec'), globals())\n"
    )
    return header + code


class WorkerCrash(RuntimeError):
    pass


class CodeTool(ToolPlugin):
    tool_id = "code_interpreter"
    stop_strings = ("```output", "</python>")

    def __init__(
        self,
        worker_cmd: Sequence[str],
        spill_dir: Path,
        *,
        timeout_s: float = 10.0,
        output_cap: int = DEFAULT_OUTPUT_CAP,
    ):
        if not worker_cmd:
            raise ValueError("worker_cmd must name the sandbox worker executable")
        self.worker_cmd = list(worker_cmd)
        self.spill_dir = Path(spill_dir)
        self.timeout_s = timeout_s
        self.output_cap = output_cap

    def parse_action(self, action_text: str) -> str | None:
        return parse_code_action(action_text)

    def init_env(self, trajectory_id: str) -> dict[str, Any]:
        self.spill_dir.mkdir(parents=True, exist_ok=True)
        workdir = tempfile.mkdtemp(prefix="code-", dir=self.spill_dir)
        return {"workdir": workdir, "snippets": []}

    def _run_job(self, job: dict[str, Any]) -> dict[str, Any]:
        try:
            proc = subprocess.run(
                self.worker_cmd,
                input=(json.dumps(job) + "\n").encode("utf-8"),
                capture_output=True,
                timeout=self.timeout_s + 5.0,  # backstop; the worker enforces timeout_s
            )
        except FileNotFoundError as exc:
            raise WorkerCrash(f"worker executable missing: {exc}") from None
        except subprocess.TimeoutExpired:
            raise WorkerCrash("worker did not respond within its grace period") from None
        if proc.returncode != 0:
            raise WorkerCrash(f"worker exited with status {proc.returncode}")
        line = proc.stdout.decode("utf-8", errors="replace").strip().splitlines()
        try:
            return json.loads(line[-1]) if line else {}
        except json.JSONDecodeError:
            raise WorkerCrash("worker emitted a malformed result line") from None

    def conduct_action(self, env: "EnvState", tool_input: str) -> ToolResult:
        job = {
            "code": build_program(env.data["snippets"], tool_input),
            "timeout_s": self.timeout_s,
            "stdout_cap_bytes": self.output_cap,
            "cwd": env.data["workdir"],
        }
        try:
            result = self._run_job(job)
        except WorkerCrash as exc:
            return ToolResult(f"Tool error: {exc}", valid=False)
        if result.get("timed_out"):
            return ToolResult(f"Tool call timed out after {self.timeout_s:g} s.", valid=False)
        body = cap_bytes(result.get("stdout", "") + result.get("stderr", ""), self.output_cap)
        env.data["snippets"].append(tool_input)
        return ToolResult(f"\n```output\n{body}\n```")

    def teardown_env(self, env: "EnvState") -> None:
        workdir = env.data.get("workdir")
        if workdir:
            shutil.rmtree(workdir, ignore_errors=True)
