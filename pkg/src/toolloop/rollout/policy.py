"""Policies that produce one action per turn.

A policy sees the full prompt (task prompt plus the decoded trajectory so
far) and the stop strings in play, and returns the action text with one
log-probability per token of that text.
"""

from __future__ import annotations

import hashlib
import random
import time
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence, runtime_checkable

import httpx

from ..errors import ServerUnreachable
from ..tokenizer import Tokenizer
from ..trajectory import Trajectory

DEFAULT_FALLBACK_ACTION = "I do not know."


@dataclass(frozen=True)
class PolicyAction:
    text: str
    token_logprobs: list[float]


@runtime_checkable
class Policy(Protocol):
    policy_id: str

    def next_action(
        self, prompt: str, traj: Trajectory, stop_strings: Sequence[str]
    ) -> PolicyAction:
        ...


def _call_rng(seed: int, fingerprint: str, turn_index: int) -> random.Random:
    material = f"{seed}:{fingerprint}:{turn_index}".encode("utf-8")
    digest = hashlib.sha256(material).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


class ScriptedPolicy:
    """Deterministic policy driven by a per-prompt list of actions.

    Scripts are keyed by the task prompt. Turn k plays the script's k-th
    entry; past the end (or for an unknown prompt) the fallback action is
    emitted, which matches no stop string and therefore ends the episode.

    Log-probabilities and synthetic generation latency are drawn from an RNG
    seeded by (seed, prompt fingerprint, turn index), so they do not depend
    on the order in which concurrent rollouts interleave their calls.
    """

    def __init__(
        self,
        script: Mapping[str, Sequence[str]],
        tokenizer: Tokenizer,
        *,
        policy_id: str = "scripted",
        seed: int = 0,
        gen_delay: tuple[float, float] = (0.0, 0.0),
        delays: Mapping[str, Sequence[float]] | None = None,
        fallback_action: str = DEFAULT_FALLBACK_ACTION,
    ) -> None:
        if gen_delay[0] < 0 or gen_delay[1] < gen_delay[0]:
            raise ValueError(f"gen_delay must be 0 <= lo <= hi, got {gen_delay}")
        self.policy_id = policy_id
        self._script = {k: list(v) for k, v in script.items()}
        self._tokenizer = tokenizer
        self._seed = seed
        self._gen_delay = gen_delay
        self._delays = {k: list(v) for k, v in (delays or {}).items()}
        self._fallback = fallback_action

    @staticmethod
    def _base_prompt(prompt: str, traj: Trajectory) -> str:
        suffix = traj.text()
        if suffix and prompt.endswith(suffix):
            return prompt[: len(prompt) - len(suffix)]
        return prompt

    def next_action(
        self, prompt: str, traj: Trajectory, stop_strings: Sequence[str]
    ) -> PolicyAction:
        base = self._base_prompt(prompt, traj)
        turn_index = sum(1 for s in traj.segments if s.origin == "action")
        lines = self._script.get(base)
        if lines is not None and turn_index < len(lines):
            text = lines[turn_index]
        else:
            text = self._fallback

        fingerprint = hashlib.sha256(base.encode("utf-8")).hexdigest()[:16]
        rng = _call_rng(self._seed, fingerprint, turn_index)

        delay_row = self._delays.get(base)
        if delay_row is not None:
            delay = delay_row[turn_index] if turn_index < len(delay_row) else 0.0
        else:
            delay = rng.uniform(*self._gen_delay)
        if delay > 0:
            time.sleep(delay)

        tokens = self._tokenizer.encode(text)
        logprobs = [-abs(rng.gauss(0.0, 1.0)) for _ in tokens]
        return PolicyAction(text=text, token_logprobs=logprobs)


class RemotePolicy:
    """Policy backed by a generation endpoint.

    Sends ``{"prompt", "stop", "max_tokens"}`` and expects
    ``{"text", "token_logprobs"}`` back. Any transport failure or malformed
    reply raises ServerUnreachable, which the rollout driver records as an
    error episode.
    """

    def __init__(
        self,
        base_url: str,
        *,
        policy_id: str = "remote",
        max_tokens: int = 1024,
        timeout_s: float = 120.0,
        client: httpx.Client | None = None,
    ) -> None:
        self.policy_id = policy_id
        self._url = base_url
        self._max_tokens = max_tokens
        self._client = client or httpx.Client(timeout=timeout_s)

    def next_action(
        self, prompt: str, traj: Trajectory, stop_strings: Sequence[str]
    ) -> PolicyAction:
        payload = {
            "prompt": prompt,
            "stop": list(stop_strings),
            "max_tokens": self._max_tokens,
        }
        try:
            resp = self._client.post(self._url, json=payload)
            resp.raise_for_status()
            body = resp.json()
            text = body["text"]
            logprobs = [float(x) for x in body["token_logprobs"]]
        except (httpx.HTTPError, ValueError, KeyError, TypeError) as exc:
            raise ServerUnreachable(f"generation call failed: {exc}") from exc
        if not isinstance(text, str):
            raise ServerUnreachable(f"generation reply text is {type(text).__name__}")
        return PolicyAction(text=text, token_logprobs=logprobs)

    def close(self) -> None:
        self._client.close()
