import time

from toolloop.plugins.base import REQUEST_EXTRA_KEY, ToolPlugin, ToolResult
from toolloop.plugins.sleeper import SleeperTool
from toolloop.server.envstore import EnvStore
from toolloop.server.pool import WorkerPool
from toolloop.server.registry import ToolRegistry
from toolloop.server.service import ToolRequest, ToolResponse, ToolServer


class EchoTool(ToolPlugin):
    tool_id = "echo"
    stop_strings = ("</echo>",)

    def parse_action(self, action_text):
        start = action_text.rfind("<echo>")
        if start < 0 or not action_text.endswith("</echo>"):
            return None
        return action_text[start + 6 : -7]

    def conduct_action(self, env, tool_input):
        env.data["calls"] = env.data.get("calls", 0) + 1
        extra = env.data.get(REQUEST_EXTRA_KEY, {})
        return ToolResult(f"echo:{env.trajectory_id}:{tool_input}:{extra.get('tag', '')}")


class CrashTool(ToolPlugin):
    tool_id = "crash"
    stop_strings = ("</crash>",)

    def parse_action(self, action_text):
        return "x" if action_text.endswith("</crash>") else None

    def conduct_action(self, env, tool_input):
        raise RuntimeError("tool blew up")


class TeardownProbe(ToolPlugin):
    tool_id = "probe"
    stop_strings = ("</probe>",)

    def __init__(self):
        self.torn_down = []

    def parse_action(self, action_text):
        return "x" if action_text.endswith("</probe>") else None

    def conduct_action(self, env, tool_input):
        return ToolResult("ok")

    def init_env(self, trajectory_id):
        return {"id": trajectory_id}

    def teardown_env(self, env):
        self.torn_down.append(env.trajectory_id)


def make_server(*plugins, max_concurrent=8, timeout_ms=1000, obs_byte_cap=8192):
    return ToolServer(
        ToolRegistry(plugins),
        EnvStore(),
        WorkerPool(max_concurrent, timeout_ms),
        obs_byte_cap=obs_byte_cap,
    )


def test_empty_batch():
    assert make_server(EchoTool()).handle_batch([]) == []


def test_single_request_roundtrip():
    server = make_server(EchoTool())
    [resp] = server.handle_batch([ToolRequest("t1", "hi <echo>ping</echo>")])
    assert isinstance(resp, ToolResponse)
    assert resp.observation == "echo:t1:ping:"
    assert resp.valid and not resp.done
    assert resp.latency_ms >= 0.0


def test_positional_alignment_under_concurrency():
    server = make_server(EchoTool(), max_concurrent=4)
    reqs = [ToolRequest(f"t{i}", f"<echo>{i}</echo>") for i in range(32)]
    resps = server.handle_batch(reqs)
    for i, resp in enumerate(resps):
        assert resp.observation == f"echo:t{i}:{i}:"


def test_unroutable_action():
    server = make_server(EchoTool())
    [resp] = server.handle_batch([ToolRequest("t1", "no stop here")])
    assert (resp.observation, resp.valid, resp.done) == ("", False, False)


def test_malformed_payload_invalid():
    server = make_server(EchoTool())
    # ends with the stop string but has no opening tag to extract
    [resp] = server.handle_batch([ToolRequest("t1", "text</echo>")])
    assert (resp.observation, resp.valid, resp.done) == ("", False, False)


def test_empty_trajectory_id_rejected_per_item():
    server = make_server(EchoTool())
    [resp] = server.handle_batch([ToolRequest("", "<echo>x</echo>")])
    assert not resp.valid and "trajectory id" in resp.observation


def test_crash_encoded_not_raised():
    server = make_server(CrashTool(), EchoTool())
    resps = server.handle_batch(
        [ToolRequest("t1", "<crash>boom</crash>"), ToolRequest("t2", "<echo>ok</echo>")]
    )
    assert not resps[0].valid and "tool blew up" in resps[0].observation
    assert resps[0].done is False
    assert resps[1].observation == "echo:t2:ok:"


def test_finish_deletes_env_and_reports_done():
    probe = TeardownProbe()
    server = make_server(probe)
    server.handle_batch([ToolRequest("t1", "<probe>go</probe>")])
    assert server.store.peek("t1", "probe") is not None
    [resp] = server.handle_batch([ToolRequest("t1", "", finish=True)])
    assert resp.done and resp.valid and resp.observation == ""
    assert server.store.peek("t1", "probe") is None
    assert probe.torn_down == ["t1"]
    # idempotent
    [resp2] = server.handle_batch([ToolRequest("t1", "", finish=True)])
    assert resp2.done


def test_extra_fields_reach_plugin_but_do_not_persist():
    server = make_server(EchoTool())
    [resp] = server.handle_batch(
        [ToolRequest("t1", "<echo>x</echo>", extra={"tag": "gold"})]
    )
    assert resp.observation == "echo:t1:x:gold"
    assert REQUEST_EXTRA_KEY not in server.store.peek("t1", "echo").data


def test_env_accumulates_across_calls():
    server = make_server(EchoTool())
    server.handle_batch([ToolRequest("t1", "<echo>a</echo>")])
    server.handle_batch([ToolRequest("t1", "<echo>b</echo>")])
    assert server.store.peek("t1", "echo").data["calls"] == 2


def test_timeout_returns_invalid_within_slack():
    server = make_server(SleeperTool(), timeout_ms=300)
    start = time.perf_counter()
    [resp] = server.handle_batch([ToolRequest("t1", "<sleep>5</sleep>")])
    wall = time.perf_counter() - start
    assert not resp.valid and not resp.done
    assert "timed out" in resp.observation
    assert resp.latency_ms <= 300 + 250
    assert wall < 2.0


def test_mixed_batch_contract():
    """64 mixed requests, pool of 8: alignment, bounded gauge, timeout latencies."""
    server = make_server(SleeperTool(), EchoTool(), max_concurrent=8, timeout_ms=300)
    server.pool.reset_peak()
    reqs = []
    for i in range(64):
        if i % 4 == 0:
            reqs.append(ToolRequest(f"t{i}", "<sleep>5</sleep>"))  # will time out
        elif i % 4 == 1:
            reqs.append(ToolRequest(f"t{i}", f"<echo>{i}</echo>"))
        elif i % 4 == 2:
            reqs.append(ToolRequest(f"t{i}", "<sleep>0.02</sleep>"))
        else:
            reqs.append(ToolRequest(f"t{i}", "plain answer"))
    resps = server.handle_batch(reqs)
    assert len(resps) == 64
    assert server.pool.peak_in_flight <= 8
    for i, resp in enumerate(resps):
        if i % 4 == 0:
            assert not resp.valid and resp.latency_ms <= 300 + 250
        elif i % 4 == 1:
            assert resp.observation == f"echo:t{i}:{i}:"
        elif i % 4 == 2:
            assert resp.observation.startswith("slept")
        else:
            assert (resp.observation, resp.valid) == ("", False)


def test_observation_byte_cap_enforced():
    class Bloater(ToolPlugin):
        tool_id = "bloat"
        stop_strings = ("</bloat>",)

        def parse_action(self, action_text):
            return "x" if action_text.endswith("</bloat>") else None

        def conduct_action(self, env, tool_input):
            return ToolResult("y" * 100_000)

    server = make_server(Bloater(), obs_byte_cap=512)
    [resp] = server.handle_batch([ToolRequest("t1", "<bloat>go</bloat>")])
    assert len(resp.observation.encode()) <= 512
    assert resp.observation.endswith("...[truncated]")


def test_timed_out_execution_does_not_corrupt_env():
    """A timed-out call's late mutations stay in its private copy."""

    class SlowWriter(ToolPlugin):
        tool_id = "slowwrite"
        stop_strings = ("</slowwrite>",)

        def parse_action(self, action_text):
            return "x" if action_text.endswith("</slowwrite>") else None

        def conduct_action(self, env, tool_input):
            env.data["value"] = "dirty"
            time.sleep(1.0)
            return ToolResult("late")

    server = make_server(SlowWriter(), timeout_ms=100)
    [resp] = server.handle_batch([ToolRequest("t1", "<slowwrite>x</slowwrite>")])
    assert not resp.valid
    time.sleep(1.2)  # let the abandoned thread finish
    env = server.store.peek("t1", "slowwrite")
    assert env is None or "value" not in env.data
    server.close()
