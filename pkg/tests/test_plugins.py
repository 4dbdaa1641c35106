import json
import math
import sys
from pathlib import Path

import pytest

from toolloop.plugins.base import extract_tag
from toolloop.plugins.calculator import (
    CalcError,
    CalculatorTool,
    calculator_execute,
    format_number,
)
from toolloop.plugins.code import CodeTool, build_program, parse_code_action
from toolloop.plugins.finish import FinishTool, finish_parse
from toolloop.plugins.shell import ShellTool
from toolloop.server.envstore import EnvState


def env_for(tool, tid="t1"):
    return EnvState(tid, tool.tool_id, tool.init_env(tid))


# --- tag extraction ---


def test_extract_tag_basic():
    assert extract_tag("<sql>SELECT 1;</sql>", "sql") == "SELECT 1;"
    assert extract_tag("think first <search>venezuela independence</search>", "search") == (
        "venezuela independence"
    )


def test_extract_tag_takes_last_open():
    assert extract_tag("<sql>a</sql> then <sql>b</sql>", "sql") == "b"


def test_extract_tag_absent():
    assert extract_tag("plain text", "sql") is None
    assert extract_tag("no opener</sql>", "sql") is None
    assert extract_tag("<sql>unclosed", "sql") is None


def test_extract_tag_trims():
    assert extract_tag("<answer>  563.9\n</answer>", "answer") == "563.9"


# --- calculator ---


def test_calculator_long_division():
    assert calculator_execute("3947/7") == "563.857142857143"


def test_calculator_trivia():
    assert calculator_execute("0") == "0"
    assert calculator_execute("2+3*4") == "14"
    assert calculator_execute("(2+3)*4") == "20"
    assert calculator_execute("10/4") == "2.5"
    assert calculator_execute("-(2+3)*2") == "-10"
    assert calculator_execute("--4") == "4"
    assert calculator_execute("1.5*2") == "3"


def test_calculator_division_by_zero():
    with pytest.raises(CalcError, match="division by zero"):
        calculator_execute("1/0")


def test_calculator_parse_errors():
    for bad in ["", "1+", "2**3", "(1", "1 2", "abc", "4%2", "."]:
        with pytest.raises(CalcError):
            calculator_execute(bad)


def test_format_number_edges():
    assert format_number(563.857142857142857) == "563.857142857143"
    assert format_number(-0.0) == "0"
    assert format_number(2.0) == "2"
    assert format_number(0.1 + 0.2) == "0.3"


def test_calculator_tool_flow():
    tool = CalculatorTool()
    assert tool.parse_action("compute <calc>3947/7</calc>") == "3947/7"
    assert tool.parse_action("no call here") is None
    res = tool.conduct_action(env_for(tool), "3947/7")
    assert (res.observation, res.valid, res.done) == ("563.857142857143", True, False)
    bad = tool.conduct_action(env_for(tool), "1/0")
    assert not bad.valid and "division by zero" in bad.observation


# --- finish ---


def test_finish_parse():
    assert finish_parse("<answer>563.9</answer>") == "563.9"
    assert finish_parse("reasoning <answer> Walker Smith Jr. </answer>") == "Walker Smith Jr."
    assert finish_parse("no tags") is None


def test_finish_conduct_terminates():
    tool = FinishTool()
    res = tool.conduct_action(env_for(tool), "42")
    assert (res.observation, res.valid, res.done) == ("", True, True)


# --- shell ---


@pytest.fixture()
def shell(tmp_path):
    return ShellTool(tmp_path / "spill", timeout_s=2.0)


def test_shell_echo(shell):
    res = shell.conduct_action(env_for(shell), "echo hi")
    assert res.observation == "hi\n(exit 0)"
    assert res.valid


def test_shell_exit_code(shell):
    res = shell.conduct_action(env_for(shell), "false")
    assert res.observation == "(exit 1)"


def test_shell_stderr_combined(shell):
    res = shell.conduct_action(env_for(shell), "echo oops >&2")
    assert res.observation == "oops\n(exit 0)"


def test_shell_timeout(shell):
    res = shell.conduct_action(env_for(shell), "sleep 5")
    assert not res.valid and "timed out" in res.observation


def test_shell_isolation_and_teardown(shell):
    env1, env2 = env_for(shell, "t1"), env_for(shell, "t2")
    shell.conduct_action(env1, "echo secret > probe.txt")
    res = shell.conduct_action(env2, "ls")
    assert res.observation == "(exit 0)"  # nothing to list: t2 can't see t1's file
    res1 = shell.conduct_action(env1, "cat probe.txt")
    assert res1.observation == "secret\n(exit 0)"
    shell.teardown_env(env1)
    assert not Path(env1.data["workdir"]).exists()


def test_shell_output_capped(tmp_path):
    shell = ShellTool(tmp_path, timeout_s=5.0, output_cap=256)
    res = shell.conduct_action(env_for(shell), "yes x | head -c 10000")
    assert len(res.observation.encode()) <= 256 + len("\n(exit 0)")
    assert "...[truncated]" in res.observation


# --- code interpreter (plugin-side plumbing; the real worker is exercised elsewhere) ---


def test_parse_code_action_tag_form():
    assert parse_code_action("<python>print(1)</python>") == "print(1)"


def test_parse_code_action_fence_form():
    action = "let me compute\n```python\nprint(0)\n```\n```output"
    assert parse_code_action(action) == "print(0)"


def test_parse_code_action_takes_last_fence():
    action = "```python\nfirst\n```\ntext\n```python\nsecond\n```\n```output"
    assert parse_code_action(action) == "second"


def test_parse_code_action_absent():
    assert parse_code_action("no code here") is None
    assert parse_code_action("``` not python ```\n```output") is None


def test_build_program_replays_silently():
    program = build_program(["x = 2", "print('noise')"], "print(x * 21)")
    scope = {}
    import contextlib
    import io

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        exec(compile(program, "<test>", "exec"), scope)
    assert buf.getvalue() == "42\n"  # prior print suppressed, new one visible


def test_build_program_no_prior_is_identity():
    assert build_program([], "print(1)") == "print(1)"


FAKE_WORKER_OK = (
    "import sys, json; job = json.loads(sys.stdin.readline()); "
    "print(json.dumps({'stdout': '0\\n', 'stderr': '', 'exit_status': 0, 'timed_out': False}))"
)
FAKE_WORKER_TIMEOUT = (
    "import sys, json; sys.stdin.readline(); "
    "print(json.dumps({'stdout': '', 'stderr': '', 'exit_status': -1, 'timed_out': True}))"
)


def code_tool(tmp_path, worker_script):
    return CodeTool([sys.executable, "-c", worker_script], tmp_path / "spill", timeout_s=2.0)


def test_code_tool_success_wraps_output(tmp_path):
    tool = code_tool(tmp_path, FAKE_WORKER_OK)
    env = env_for(tool)
    res = tool.conduct_action(env, "print(0)")
    assert res.valid
    assert res.observation == "\n```output\n0\n\n```"
    assert "0" in res.observation
    assert env.data["snippets"] == ["print(0)"]


def test_code_tool_timeout_result(tmp_path):
    tool = code_tool(tmp_path, FAKE_WORKER_TIMEOUT)
    env = env_for(tool)
    res = tool.conduct_action(env, "while True: pass")
    assert not res.valid and "timed out" in res.observation
    assert env.data["snippets"] == []  # failed snippet is not replayed later


def test_code_tool_worker_missing(tmp_path):
    tool = CodeTool(["/nonexistent/worker"], tmp_path, timeout_s=1.0)
    res = tool.conduct_action(env_for(tool), "print(1)")
    assert not res.valid and "Tool error" in res.observation


def test_code_tool_malformed_worker_reply(tmp_path):
    tool = code_tool(tmp_path, "import sys; sys.stdin.readline(); print('not json')")
    res = tool.conduct_action(env_for(tool), "print(1)")
    assert not res.valid and "malformed" in res.observation


def test_code_tool_requires_worker_cmd(tmp_path):
    with pytest.raises(ValueError):
        CodeTool([], tmp_path)


def test_code_tool_job_shape(tmp_path):
    """The job line carries code, timeout, cap, and the env's workdir."""
    capture = tmp_path / "job.json"
    script = (
        "import sys, json, pathlib; "
        f"pathlib.Path({str(capture)!r}).write_text(sys.stdin.readline()); "
        "print(json.dumps({'stdout': '', 'stderr': '', 'exit_status': 0, 'timed_out': False}))"
    )
    tool = code_tool(tmp_path, script)
    env = env_for(tool)
    tool.conduct_action(env, "print(1)")
    job = json.loads(capture.read_text())
    assert job["code"] == "print(1)"
    assert job["timeout_s"] == 2.0
    assert job["stdout_cap_bytes"] == tool.output_cap
    assert job["cwd"] == env.data["workdir"]
