"""Validated application configuration with named task profiles.

A config comes from three layers, later layers winning: built-in defaults,
an optional named profile (limits plus tool set), and the YAML file itself.
Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import copy
import tempfile
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .bench import DEFAULT_BENCH_SEED, LatencyModel
from .errors import ConfigError
from .plugins.calculator import CalculatorTool
from .plugins.code import CodeTool
from .plugins.finish import FinishTool
from .plugins.search import SearchIndex, SearchTool, load_corpus
from .plugins.shell import ShellTool
from .plugins.sleeper import SleeperTool
from .plugins.sql import SqlTool
from .resources import fixture_path
from .rl.loss import LossConfig
from .rollout.episodes import RolloutLimits
from .server import EnvStore, ToolRegistry, ToolServer, WorkerPool


class ServerSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    host: str = "127.0.0.1"
    port: int = Field(default=8000, ge=1, le=65535)
    pool_size: int = Field(default=8, ge=1)
    call_timeout_ms: int = Field(default=30_000, ge=1)
    obs_byte_cap: int = Field(default=8192, ge=16)


class ToolsSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enabled: list[str] = Field(default_factory=lambda: ["calculator", "finish"])
    spill_dir: str | None = None
    sql_fixture: str | None = None
    sql_turn_budget: int = Field(default=5, ge=1)
    corpus_path: str | None = None
    search_k: int = Field(default=3, ge=1)
    code_worker_cmd: list[str] | None = None
    code_timeout_s: float = Field(default=10.0, gt=0)
    shell_timeout_s: float = Field(default=10.0, gt=0)


class LimitsSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_turns: int = Field(default=6, ge=1)
    max_prompt_tokens: int = Field(default=4096, ge=1)
    max_response_tokens: int = Field(default=4096, ge=1)
    max_action_tokens: int = Field(default=1024, ge=1)
    max_obs_tokens: int = Field(default=2048, ge=1)

    def to_limits(self) -> RolloutLimits:
        return RolloutLimits(**self.model_dump())


class LossSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epsilon_clip: float = Field(default=0.2, gt=0, lt=1)
    kl_beta: float = Field(default=0.0, ge=0)
    std_floor: float = Field(default=1e-6, gt=0)

    def to_loss_config(self) -> LossConfig:
        return LossConfig(**self.model_dump())


class BenchSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = DEFAULT_BENCH_SEED
    batch: int = Field(default=16, ge=1)
    turns: int = Field(default=5, ge=1)
    repeats: int = Field(default=1, ge=1)
    gen_low: float = Field(default=0.2, ge=0)
    gen_high: float = Field(default=1.0, ge=0)
    tool_low: float = Field(default=0.1, ge=0)
    tool_high: float = Field(default=2.0, ge=0)

    def to_latency_model(self) -> LatencyModel:
        return LatencyModel(
            gen_low=self.gen_low,
            gen_high=self.gen_high,
            tool_low=self.tool_low,
            tool_high=self.tool_high,
            seed=self.seed,
        )


class RolloutSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scheduler: str = Field(default="async", pattern="^(sync|async)$")
    samples: int = Field(default=1, ge=1)
    max_parallel: int | None = Field(default=None, ge=1)
    policy_seed: int = 0
    policy_url: str | None = None


class AppConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    profile: str | None = None
    server: ServerSettings = Field(default_factory=ServerSettings)
    tools: ToolsSettings = Field(default_factory=ToolsSettings)
    limits: LimitsSettings = Field(default_factory=LimitsSettings)
    loss: LossSettings = Field(default_factory=LossSettings)
    bench: BenchSettings = Field(default_factory=BenchSettings)
    rollout: RolloutSettings = Field(default_factory=RolloutSettings)


PROFILES: dict[str, dict[str, Any]] = {
    "math": {
        "limits": {
            "max_turns": 4,
            "max_prompt_tokens": 1024,
            "max_response_tokens": 3072,
            "max_action_tokens": 2048,
            "max_obs_tokens": 512,
        },
        "tools": {"enabled": ["calculator", "finish"]},
    },
    "search": {
        "limits": {
            "max_turns": 2,
            "max_prompt_tokens": 4096,
            "max_response_tokens": 4096,
            "max_action_tokens": 2048,
            "max_obs_tokens": 1024,
        },
        "tools": {"enabled": ["search", "finish"]},
    },
    "sql": {
        "limits": {
            "max_turns": 5,
            "max_prompt_tokens": 4096,
            "max_response_tokens": 4096,
            "max_action_tokens": 2048,
            "max_obs_tokens": 1024,
        },
        "tools": {"enabled": ["sql", "finish"]},
    },
    "deepsearch": {
        "limits": {
            "max_turns": 10,
            "max_prompt_tokens": 2048,
            "max_response_tokens": 32768,
            "max_action_tokens": 16483,
            "max_obs_tokens": 4096,
        },
        "tools": {"enabled": ["search", "finish"]},
    },
}


def _deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(
    path: str | Path | None = None, profile: str | None = None
) -> AppConfig:
    """Load and validate a config file, optionally applying a named profile.

    The profile named on the command line wins over the file's ``profile:``
    key; explicit file sections override profile presets either way.
    """
    source = str(path) if path is not None else "<defaults>"
    raw: dict[str, Any] = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except yaml.YAMLError as exc:
            raise ConfigError(f"{source}: not valid YAML: {exc}")
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{source}: top level must be a mapping")
        raw = loaded

    file_profile = raw.pop("profile", None)
    chosen = profile if profile is not None else file_profile
    merged: dict[str, Any] = {}
    if chosen is not None:
        if chosen not in PROFILES:
            raise ConfigError(
                f"unknown profile {chosen!r}; expected one of {sorted(PROFILES)}"
            )
        merged = copy.deepcopy(PROFILES[chosen])
    merged = _deep_merge(merged, raw)
    merged["profile"] = chosen
    try:
        return AppConfig.model_validate(merged)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "<root>"
        raise ConfigError(f"{source}: {where}: {first['msg']}")


def build_registry(config: AppConfig) -> ToolRegistry:
    """Construct the registry for the enabled tools, validating their inputs."""
    tools = config.tools
    spill = Path(tools.spill_dir) if tools.spill_dir else Path(tempfile.mkdtemp(prefix="toolloop-"))
    registry = ToolRegistry()
    for tool_id in tools.enabled:
        if tool_id == "calculator":
            registry.register(CalculatorTool())
        elif tool_id == "finish":
            registry.register(FinishTool())
        elif tool_id == "search":
            corpus = Path(tools.corpus_path) if tools.corpus_path else fixture_path("corpus.jsonl")
            if not corpus.exists():
                raise ConfigError(f"search corpus not found: {corpus}")
            index = SearchIndex(load_corpus(corpus))
            registry.register(SearchTool(index, k=tools.search_k))
        elif tool_id == "sql":
            fixture = Path(tools.sql_fixture) if tools.sql_fixture else fixture_path("student_pet.sql")
            try:
                registry.register(
                    SqlTool(fixture, spill, turn_budget=tools.sql_turn_budget)
                )
            except FileNotFoundError as exc:
                raise ConfigError(str(exc))
        elif tool_id == "shell":
            registry.register(ShellTool(spill, timeout_s=tools.shell_timeout_s))
        elif tool_id == "code_interpreter":
            if not tools.code_worker_cmd:
                raise ConfigError(
                    "code_interpreter enabled but tools.code_worker_cmd is not set"
                )
            registry.register(
                CodeTool(tools.code_worker_cmd, spill, timeout_s=tools.code_timeout_s)
            )
        elif tool_id == "sleep":
            registry.register(SleeperTool())
        else:
            raise ConfigError(f"unknown tool id {tool_id!r} in tools.enabled")
    return registry


def build_server(config: AppConfig) -> ToolServer:
    registry = build_registry(config)
    pool = WorkerPool(config.server.pool_size, config.server.call_timeout_ms)
    return ToolServer(
        registry, EnvStore(), pool, obs_byte_cap=config.server.obs_byte_cap
    )
