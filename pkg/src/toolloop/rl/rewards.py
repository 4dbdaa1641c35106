"""Verifiable reward functions for tool-use tasks.

Each task family scores a finished episode from externally checkable signals
(string match against a gold answer, test outcomes, tool usage counters).
All functions are pure and return plain floats.
"""

from __future__ import annotations

from typing import Callable

Matcher = Callable[[str, str], bool]


def normalized_match(answer: str, gold: str) -> bool:
    """Exact match after collapsing runs of whitespace and trimming."""
    return " ".join(answer.split()) == " ".join(gold.split())


def reward_match(answer: str, gold: str, matcher: Matcher = normalized_match) -> float:
    """+1 when the matcher accepts the answer, -1 otherwise."""
    return 1.0 if matcher(answer, gold) else -1.0


def reward_math(answer: str, gold: str, matcher: Matcher = normalized_match) -> float:
    """Accuracy term plus a flat -0.25 penalty on mismatch.

    The penalty applies on every mismatch whether or not a tool was used.
    """
    if matcher(answer, gold):
        return 1.0
    return -1.0 + -0.25


def reward_deepsearch(
    answer: str, gold: str, tool_called: bool, matcher: Matcher = normalized_match
) -> float:
    """+-1 accuracy plus a 0.1 bonus whenever at least one tool call was made."""
    base = 1.0 if matcher(answer, gold) else -1.0
    return base + (0.1 if tool_called else 0.0)


def reward_visual_reasoner(
    r_acc: float,
    invoked_tool: bool,
    rapr: float,
    n_vo: int,
    *,
    h: float = 0.3,
    n: int = 1,
    alpha: float = 0.5,
    beta: float = 0.05,
) -> float:
    """Accuracy plus a curiosity bonus and an over-use penalty.

    ``rapr`` is the fraction of responses in the group that invoked tools;
    the curiosity bonus alpha*max(h - rapr, 0) is paid only to responses that
    themselves invoked a tool. ``n_vo`` counts this response's tool
    invocations; each one beyond ``n`` costs ``beta``.
    """
    curiosity = alpha * max(h - rapr, 0.0) if invoked_tool else 0.0
    penalty = beta * min(n - n_vo, 0)
    return r_acc + curiosity + penalty


def reward_swe(terminated_ok: bool, all_tests_pass: bool) -> float:
    """1 only for a clean termination with every test passing."""
    return 1.0 if terminated_ok and all_tests_pass else 0.0
