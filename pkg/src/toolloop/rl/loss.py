"""Group-normalized, observation-masked clipped policy-gradient objective.

The multi-turn variant normalizes each trajectory by its action-token count
and skips observation tokens entirely, so tool output never contributes loss
signal. The single-turn variant normalizes over all tokens; on trajectories
with a single action segment the two reduce to the same number.

Sign convention: these functions return the objective to maximize; a trainer
would negate it. Everything is plain-float arithmetic with a fixed summation
order, which makes the masking-invariance property bitwise, not approximate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ..errors import GroupTooSmall, MaskMismatch
from ..trajectory import Trajectory, action_mask, flatten

# Log-ratio differences are clamped to +-RATIO_CLAMP before exponentiation so a
# pathological logprob gap yields a finite ratio instead of overflow.
RATIO_CLAMP = 20.0


@dataclass(frozen=True)
class TokenRecord:
    token: int
    logp_new: float
    logp_old: float
    action_bit: int
    logp_ref: float | None = None


@dataclass
class GroupBatch:
    """G trajectories answering the same input, with one scalar reward each."""

    group_id: str
    trajectories: list[list[TokenRecord]]
    rewards: list[float]

    def __post_init__(self) -> None:
        if len(self.trajectories) != len(self.rewards):
            raise MaskMismatch(
                f"group {self.group_id!r}: {len(self.trajectories)} trajectories "
                f"vs {len(self.rewards)} rewards"
            )


@dataclass(frozen=True)
class LossConfig:
    epsilon_clip: float = 0.2
    kl_beta: float = 0.0
    std_floor: float = 1e-6

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon_clip < 1.0:
            raise ValueError("epsilon_clip must lie in (0, 1)")
        if self.kl_beta < 0.0:
            raise ValueError("kl_beta must be non-negative")
        if self.std_floor <= 0.0:
            raise ValueError("std_floor must be positive")


@dataclass
class LossDiagnostics:
    masked_tokens: int
    total_tokens: int
    clip_fraction: float
    clamp_count: int
    kl: float


def token_records(
    traj: Trajectory,
    logp_new: Sequence[float],
    logp_old: Sequence[float],
    logp_ref: Sequence[float] | None = None,
) -> list[TokenRecord]:
    """Pair a trajectory's flattened tokens with per-token log-probabilities."""
    tokens = flatten(traj)
    mask = action_mask(traj)
    if not (len(tokens) == len(logp_new) == len(logp_old)):
        raise MaskMismatch(
            f"{len(tokens)} tokens vs {len(logp_new)} new / {len(logp_old)} old logps"
        )
    if logp_ref is not None and len(logp_ref) != len(tokens):
        raise MaskMismatch(f"{len(tokens)} tokens vs {len(logp_ref)} ref logps")
    return [
        TokenRecord(
            token=t,
            logp_new=float(logp_new[i]),
            logp_old=float(logp_old[i]),
            action_bit=mask[i],
            logp_ref=float(logp_ref[i]) if logp_ref is not None else None,
        )
        for i, t in enumerate(tokens)
    ]


def group_advantages(rewards: Sequence[float], std_floor: float = 1e-6) -> list[float]:
    """Center by the group mean and divide by population std, floored.

    The divisor is max(std, std_floor) rather than std + std_floor: the floor
    only engages on degenerate groups, so non-degenerate advantages come out
    with population std exactly 1.
    """
    if len(rewards) < 2:
        raise GroupTooSmall(f"need at least 2 rewards, got {len(rewards)}")
    mean = math.fsum(rewards) / len(rewards)
    var = math.fsum((r - mean) ** 2 for r in rewards) / len(rewards)
    std = math.sqrt(var)
    divisor = max(std, std_floor)
    return [(r - mean) / divisor for r in rewards]


def token_ratio(rec: TokenRecord) -> float:
    """Importance ratio exp(logp_new - logp_old), clamped into exp(+-20)."""
    diff = rec.logp_new - rec.logp_old
    if diff > RATIO_CLAMP:
        diff = RATIO_CLAMP
    elif diff < -RATIO_CLAMP:
        diff = -RATIO_CLAMP
    return math.exp(diff)


def _check_alignment(batch: GroupBatch, advantages: Sequence[float]) -> None:
    if len(advantages) != len(batch.trajectories):
        raise MaskMismatch(
            f"group {batch.group_id!r}: {len(advantages)} advantages "
            f"vs {len(batch.trajectories)} trajectories"
        )
    if not batch.trajectories:
        raise GroupTooSmall("empty group")


def _k3(rec: TokenRecord) -> float:
    # Non-negative KL estimator; the exponent is clamped like the ratio so a
    # pathological reference gap stays finite.
    d = rec.logp_ref - rec.logp_new  # type: ignore[operator]
    if d > RATIO_CLAMP:
        d = RATIO_CLAMP
    elif d < -RATIO_CLAMP:
        d = -RATIO_CLAMP
    return math.exp(d) - d - 1.0


def grpo_multi_turn_loss(
    batch: GroupBatch, advantages: Sequence[float], cfg: LossConfig
) -> tuple[float, LossDiagnostics]:
    """Clipped objective over action tokens only.

    objective = (1/G) sum_i (1/n_i) sum_{action tokens t}
                    min(r_t * A_i, clip(r_t, 1-eps, 1+eps) * A_i)
                - kl_beta * k3_t   (folded per token when a reference is given)

    where n_i is trajectory i's action-token count. Observation tokens are
    skipped outright, so their log-probabilities cannot change the result.
    """
    _check_alignment(batch, advantages)
    lo, hi = 1.0 - cfg.epsilon_clip, 1.0 + cfg.epsilon_clip
    total = 0.0
    masked = 0
    total_tokens = 0
    clipped = 0
    clamps = 0
    kl_sum = 0.0
    for recs, adv in zip(batch.trajectories, advantages):
        total_tokens += len(recs)
        n_actions = sum(r.action_bit for r in recs)
        if n_actions == 0:
            continue
        acc = 0.0
        for rec in recs:
            if not rec.action_bit:
                continue
            masked += 1
            diff = rec.logp_new - rec.logp_old
            if diff > RATIO_CLAMP or diff < -RATIO_CLAMP:
                clamps += 1
            ratio = token_ratio(rec)
            term = min(ratio * adv, min(max(ratio, lo), hi) * adv)
            if (ratio > hi and adv > 0.0) or (ratio < lo and adv < 0.0):
                clipped += 1
            if rec.logp_ref is not None:
                k3 = _k3(rec)
                kl_sum += k3
                term -= cfg.kl_beta * k3
            acc += term
        total += acc / n_actions
    objective = total / len(batch.trajectories)
    diag = LossDiagnostics(
        masked_tokens=masked,
        total_tokens=total_tokens,
        clip_fraction=clipped / masked if masked else 0.0,
        clamp_count=clamps,
        kl=kl_sum / masked if masked else 0.0,
    )
    return objective, diag


def grpo_single_turn_loss(
    batch: GroupBatch, advantages: Sequence[float], cfg: LossConfig
) -> float:
    """Clipped objective normalized over all tokens, ignoring the mask.

    On trajectories whose tokens are all action tokens this performs the same
    floating-point operations in the same order as grpo_multi_turn_loss, so
    the two agree bitwise there.
    """
    _check_alignment(batch, advantages)
    lo, hi = 1.0 - cfg.epsilon_clip, 1.0 + cfg.epsilon_clip
    total = 0.0
    for recs, adv in zip(batch.trajectories, advantages):
        if not recs:
            continue
        acc = 0.0
        for rec in recs:
            ratio = token_ratio(rec)
            term = min(ratio * adv, min(max(ratio, lo), hi) * adv)
            if rec.logp_ref is not None:
                term -= cfg.kl_beta * _k3(rec)
            acc += term
        total += acc / len(recs)
    return total / len(batch.trajectories)


def unclipped_objective(
    batch: GroupBatch, advantages: Sequence[float], cfg: LossConfig
) -> tuple[float, list[list[float]]]:
    """Unclipped arm of the objective and its gradient w.r.t. each logp_new.

    Returns (value, grads) with grads[i][t] aligned to batch.trajectories[i][t];
    observation tokens get exactly zero gradient. Where the ratio clamp is
    active the subgradient is taken as zero.
    """
    _check_alignment(batch, advantages)
    g = len(batch.trajectories)
    value = 0.0
    grads: list[list[float]] = []
    for recs, adv in zip(batch.trajectories, advantages):
        row = [0.0] * len(recs)
        grads.append(row)
        n_actions = sum(r.action_bit for r in recs)
        if n_actions == 0:
            continue
        scale = 1.0 / (n_actions * g)
        acc = 0.0
        for t, rec in enumerate(recs):
            if not rec.action_bit:
                continue
            diff = rec.logp_new - rec.logp_old
            clamped = diff > RATIO_CLAMP or diff < -RATIO_CLAMP
            ratio = token_ratio(rec)
            term = ratio * adv
            grad = 0.0 if clamped else ratio * adv
            if rec.logp_ref is not None:
                d = rec.logp_ref - rec.logp_new
                if -RATIO_CLAMP <= d <= RATIO_CLAMP:
                    term -= cfg.kl_beta * (math.exp(d) - d - 1.0)
                    grad += cfg.kl_beta * (math.exp(d) - 1.0)
                else:
                    dd = max(-RATIO_CLAMP, min(RATIO_CLAMP, d))
                    term -= cfg.kl_beta * (math.exp(dd) - dd - 1.0)
            acc += term
            row[t] = grad * scale
        value += acc / n_actions
    return value / g, grads
