"""Command-line entry point: serve, rollout, bench, and loss subcommands.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage or config errors.
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from .bench import format_report_markdown, run_speedup_experiment
from .config import AppConfig, build_server, load_config
from .errors import ConfigError, EpisodeLogError, GroupTooSmall, MaskMismatch
from .rl.loss import GroupBatch, group_advantages, grpo_multi_turn_loss, token_records
from .rollout import (
    EpisodeRecord,
    LocalToolClient,
    RemotePolicy,
    ScriptedPolicy,
    Task,
    read_episodes,
    run_batch_async,
    run_batch_sync,
    write_episodes,
)
from .tokenizer import ToyMergeTokenizer


def _load(config_path: str | None, profile: str | None) -> AppConfig:
    try:
        return load_config(config_path, profile)
    except ConfigError as exc:
        raise click.UsageError(str(exc))


@click.group()
@click.version_option(package_name="toolloop")
def main() -> None:
    """Multi-turn tool-use runtime: tool server, rollouts, benchmark, loss."""


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None, help="YAML config file.")
@click.option("--profile", default=None, help="Named task profile (math, search, sql, deepsearch).")
@click.option("--host", default=None, help="Bind host (overrides config).")
@click.option("--port", type=int, default=None, help="Bind port (overrides config).")
def serve(config_path: str | None, profile: str | None, host: str | None, port: int | None) -> None:
    """Run the tool server until interrupted."""
    import uvicorn

    from .server.app import create_app

    config = _load(config_path, profile)
    try:
        server = build_server(config)
    except ConfigError as exc:
        raise click.UsageError(str(exc))
    app = create_app(server)
    try:
        uvicorn.run(
            app,
            host=host if host is not None else config.server.host,
            port=port if port is not None else config.server.port,
            log_level="info",
        )
    except OSError as exc:
        raise click.ClickException(f"cannot bind server: {exc}")


def _read_tasks(path: Path) -> list[Task]:
    tasks: list[Task] = []
    for i, line in enumerate(path.read_text(encoding="utf-8").splitlines()):
        line = line.strip()
        if not line:
            continue
        prompt, task_id, gold, extra = line, f"task-{i}", None, {}
        try:
            data = json.loads(line)
        except json.JSONDecodeError:
            data = None
        if isinstance(data, dict):
            if "prompt" not in data:
                raise click.UsageError(f"{path}:{i + 1}: task object missing 'prompt'")
            prompt = str(data["prompt"])
            task_id = str(data.get("task_id", task_id))
            gold = data.get("gold")
            extra = data.get("extra", {})
        elif isinstance(data, str):
            prompt = data
        tasks.append(Task(task_id=task_id, prompt=prompt, gold=gold, extra=extra))
    if not tasks:
        raise click.UsageError(f"{path}: no prompts found")
    return tasks


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None, help="YAML config file.")
@click.option("--profile", default=None, help="Named task profile.")
@click.option("--prompts", "prompts_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Prompts file: plain text or JSONL task objects, one per line.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Episode log to write (JSON lines).")
@click.option("--script", "script_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON file mapping prompt to a list of scripted actions.")
@click.option("--policy-url", default=None, help="Generation endpoint for a remote policy.")
@click.option("--sync/--async", "sync_mode", default=None, help="Scheduler (overrides config).")
@click.option("--samples", type=int, default=None, help="Rollouts per task (overrides config).")
@click.option("--seed", type=int, default=None, help="Policy seed (overrides config).")
def rollout(
    config_path: str | None,
    profile: str | None,
    prompts_path: str,
    out_path: str,
    script_path: str | None,
    policy_url: str | None,
    sync_mode: bool | None,
    samples: int | None,
    seed: int | None,
) -> None:
    """Roll out tasks against an in-process tool server; write an episode log."""
    config = _load(config_path, profile)
    tasks = _read_tasks(Path(prompts_path))
    n_samples = samples if samples is not None else config.rollout.samples
    if n_samples < 1:
        raise click.UsageError(f"--samples must be >= 1, got {n_samples}")
    expanded = [task for task in tasks for _ in range(n_samples)]

    tokenizer = ToyMergeTokenizer()
    url = policy_url if policy_url is not None else config.rollout.policy_url
    if url:
        policy = RemotePolicy(url)
    else:
        script = {}
        if script_path is not None:
            try:
                script = json.loads(Path(script_path).read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise click.UsageError(f"{script_path}: not valid JSON: {exc}")
        policy = ScriptedPolicy(
            script,
            tokenizer,
            seed=seed if seed is not None else config.rollout.policy_seed,
        )

    try:
        server = build_server(config)
    except ConfigError as exc:
        raise click.UsageError(str(exc))
    client = LocalToolClient(server)
    limits = config.limits.to_limits()
    use_sync = sync_mode if sync_mode is not None else config.rollout.scheduler == "sync"
    try:
        if use_sync:
            records, wall = run_batch_sync(
                policy, expanded, limits, client, tokenizer=tokenizer
            )
        else:
            records, wall = run_batch_async(
                policy, expanded, limits, client, tokenizer=tokenizer,
                max_parallel=config.rollout.max_parallel,
            )
    finally:
        server.close()

    write_episodes(out_path, records)
    mean_reward = sum(r.reward for r in records) / len(records)
    errors = sum(1 for r in records if r.trajectory.termination_cause == "error")
    click.echo(
        f"wrote {len(records)} episodes to {out_path} "
        f"(mean reward {mean_reward:.3f}, {errors} errors, {wall:.2f}s wall)"
    )
    if errors == len(records):
        raise click.ClickException("every episode failed")


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None, help="YAML config file.")
@click.option("--seed", type=int, default=None, help="Latency seed (overrides config).")
@click.option("--batch", type=int, default=None, help="Trajectories per batch.")
@click.option("--turns", type=int, default=None, help="Tool turns per trajectory.")
@click.option("--repeats", type=int, default=None, help="Measurement repeats per row.")
@click.option("--gen-low", type=float, default=None, help="Min generation latency (s).")
@click.option("--gen-high", type=float, default=None, help="Max generation latency (s).")
@click.option("--tool-low", type=float, default=None, help="Min tool latency (s).")
@click.option("--tool-high", type=float, default=None, help="Max tool latency (s).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Also write the JSON report here.")
def bench(
    config_path: str | None,
    seed: int | None,
    batch: int | None,
    turns: int | None,
    repeats: int | None,
    gen_low: float | None,
    gen_high: float | None,
    tool_low: float | None,
    tool_high: float | None,
    out_path: str | None,
) -> None:
    """Measure sync vs async scheduling against the closed-form oracle."""
    config = _load(config_path, None)
    settings = config.bench
    overrides = {
        "seed": seed, "batch": batch, "turns": turns, "repeats": repeats,
        "gen_low": gen_low, "gen_high": gen_high,
        "tool_low": tool_low, "tool_high": tool_high,
    }
    fields = {k: v for k, v in overrides.items() if v is not None}
    if fields:
        settings = settings.model_copy(update=fields)
    try:
        model = settings.to_latency_model()
    except ValueError as exc:
        raise click.UsageError(str(exc))
    report = run_speedup_experiment(
        model, batch=settings.batch, turns=settings.turns, repeats=settings.repeats
    )
    click.echo(format_report_markdown(report))
    row = report["rows"][0]
    click.echo(
        f"\nspeedup {row['speedup']:.2f}x "
        f"(oracle {row['oracle_speedup']:.2f}x, "
        f"sync err {row['sync_rel_err'] * 100:.1f}%, "
        f"async err {row['async_rel_err'] * 100:.1f}%)"
    )
    if out_path is not None:
        Path(out_path).write_text(json.dumps(report, indent=2), encoding="utf-8")
        click.echo(f"report written to {out_path}")


def _flat_logps(record: EpisodeRecord) -> list[float]:
    """Flatten per-action-segment logps to one entry per trajectory token."""
    if record.action_logprobs is None:
        raise MaskMismatch(
            f"episode {record.task_id!r} has no action_logprobs; supply --logprobs"
        )
    flat: list[float] = []
    rows = iter(record.action_logprobs)
    for seg in record.trajectory.segments:
        if seg.origin == "action":
            row = next(rows, None)
            if row is None or len(row) != len(seg.tokens):
                raise MaskMismatch(
                    f"episode {record.task_id!r}: action_logprobs do not align "
                    f"with action segments"
                )
            flat.extend(row)
        else:
            flat.extend(0.0 for _ in seg.tokens)
    return flat


def _read_sidecar(path: Path, count: int) -> list[dict]:
    rows: list[dict] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EpisodeLogError(f"{path}:{lineno}: {exc}")
        if not isinstance(data, dict) or "logp_new" not in data:
            raise EpisodeLogError(f"{path}:{lineno}: expected an object with 'logp_new'")
        rows.append(data)
    if len(rows) != count:
        raise MaskMismatch(f"{path}: {len(rows)} sidecar rows for {count} episodes")
    return rows


@main.command()
@click.option("--episodes", "episodes_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Episode log (JSON lines).")
@click.option("--logprobs", "logprobs_path", type=click.Path(exists=True, dir_okay=False),
              default=None,
              help="Sidecar JSONL with per-token logp_new/logp_old/logp_ref per episode; "
                   "defaults to the logps recorded in the episode log with ratio 1.")
@click.option("--config", "config_path", type=click.Path(), default=None, help="YAML config file.")
def loss(episodes_path: str, logprobs_path: str | None, config_path: str | None) -> None:
    """Compute the masked clipped objective over an episode log; print JSON."""
    config = _load(config_path, None)
    cfg = config.loss.to_loss_config()
    try:
        records = read_episodes(episodes_path)
    except EpisodeLogError as exc:
        raise click.ClickException(str(exc))
    if not records:
        raise click.ClickException(f"{episodes_path}: no episodes")

    try:
        if logprobs_path is not None:
            sidecar = _read_sidecar(Path(logprobs_path), len(records))
            per_record = [
                token_records(
                    rec.trajectory,
                    row["logp_new"],
                    row.get("logp_old", row["logp_new"]),
                    row.get("logp_ref"),
                )
                for rec, row in zip(records, sidecar)
            ]
        else:
            per_record = []
            for rec in records:
                flat = _flat_logps(rec)
                per_record.append(token_records(rec.trajectory, flat, list(flat)))

        groups: dict[str, list[int]] = {}
        for i, rec in enumerate(records):
            groups.setdefault(rec.task_id, []).append(i)

        objective_sum = 0.0
        masked_total = 0
        clipped_weighted = 0.0
        kl_weighted = 0.0
        for task_id, idxs in groups.items():
            batch = GroupBatch(
                group_id=task_id,
                trajectories=[per_record[i] for i in idxs],
                rewards=[records[i].reward for i in idxs],
            )
            advantages = group_advantages(batch.rewards, cfg.std_floor)
            objective, diag = grpo_multi_turn_loss(batch, advantages, cfg)
            objective_sum += objective
            masked_total += diag.masked_tokens
            clipped_weighted += diag.clip_fraction * diag.masked_tokens
            kl_weighted += diag.kl * diag.masked_tokens
    except GroupTooSmall as exc:
        raise click.ClickException(
            f"{exc}; groups need at least 2 episodes per task_id "
            f"(roll out with --samples 2 or more)"
        )
    except (MaskMismatch, EpisodeLogError) as exc:
        raise click.ClickException(str(exc))

    report = {
        "objective": objective_sum / len(groups),
        "clip_fraction": clipped_weighted / masked_total if masked_total else 0.0,
        "masked_tokens": masked_total,
        "kl": kl_weighted / masked_total if masked_total else 0.0,
        "groups": len(groups),
        "episodes": len(records),
    }
    click.echo(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
