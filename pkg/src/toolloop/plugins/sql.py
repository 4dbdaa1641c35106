"""SQL tool: one private SQLite database per trajectory, seeded from a fixture.

Each observation ends with a turn-budget reminder. The budget counts tool
calls still available at the moment the call is made: a fresh env shows
"You have 5 turns left" on its first observation, then 4, and so on; a call
arriving with no budget left terminates the episode. Engine errors come back
as normal observations (valid=true) so the policy can read them and repair
its query.
"""

from __future__ import annotations

import shutil
import sqlite3
import threading
import uuid
from pathlib import Path
from typing import Any

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ..server.envstore import EnvState
from .base import REQUEST_EXTRA_KEY, ToolPlugin, ToolResult, extract_tag

DEFAULT_TURN_BUDGET = 5
DEFAULT_ROW_CAP = 50


def render_rows(cursor: sqlite3.Cursor, row_cap: int) -> str:
    """Result rows one per line, column values tab-separated, capped at row_cap."""
    rows = cursor.fetchmany(row_cap)
    return "\n".join(
        "\t".join("" if v is None else str(v) for v in row) for row in rows
    )


def run_query(db_path: str, query: str, row_cap: int) -> str:
    conn = sqlite3.connect(db_path, timeout=10.0)
    try:
        cursor = conn.execute(query)
        if cursor.description is not None:
            return render_rows(cursor, row_cap)
        conn.commit()
        return f"OK ({cursor.rowcount} rows affected)"
    finally:
        conn.close()


class SqlTool(ToolPlugin):
    tool_id = "sql"
    stop_strings = ("</sql>",)

    def __init__(
        self,
        fixture_path: Path,
        spill_dir: Path,
        *,
        turn_budget: int = DEFAULT_TURN_BUDGET,
        row_cap: int = DEFAULT_ROW_CAP,
    ):
        if not fixture_path.exists():
            raise FileNotFoundError(f"sql fixture not found: {fixture_path}")
        self.fixture_path = Path(fixture_path)
        self.spill_dir = Path(spill_dir)
        self.turn_budget = turn_budget
        self.row_cap = row_cap
        self._template_lock = threading.Lock()
        self._template_path = self.spill_dir / "sql-template.db"

    def _ensure_template(self) -> Path:
        with self._template_lock:
            if not self._template_path.exists():
                self.spill_dir.mkdir(parents=True, exist_ok=True)
                tmp = self._template_path.with_suffix(".building")
                conn = sqlite3.connect(tmp)
                try:
                    conn.executescript(self.fixture_path.read_text(encoding="utf-8"))
                    conn.commit()
                finally:
                    conn.close()
                tmp.rename(self._template_path)
        return self._template_path

    def init_env(self, trajectory_id: str) -> dict[str, Any]:
        template = self._ensure_template()
        db_path = self.spill_dir / f"sql-{uuid.uuid4().hex}.db"
        shutil.copyfile(template, db_path)
        return {"db_path": str(db_path), "remaining_turns": None}

    def conduct_action(self, env: "EnvState", tool_input: str) -> ToolResult:
        remaining = env.data.get("remaining_turns")
        if remaining is None:
            extra = env.data.get(REQUEST_EXTRA_KEY) or {}
            remaining = int(extra.get("turn_budget", self.turn_budget))
        if remaining <= 0:
            return ToolResult("", valid=True, done=True)
        try:
            body = run_query(env.data["db_path"], tool_input, self.row_cap)
        except sqlite3.Error as exc:
            body = f"Error: {exc}"
        reminder = f"<reminder>You have {remaining} turns left to complete the task.</reminder>"
        env.data["remaining_turns"] = remaining - 1
        observation = f"{body}\n{reminder}" if body else reminder
        return ToolResult(observation)

    def parse_action(self, action_text: str) -> str | None:
        return extract_tag(action_text, "sql")

    def teardown_env(self, env: "EnvState") -> None:
        db_path = env.data.get("db_path")
        if db_path:
            Path(db_path).unlink(missing_ok=True)
