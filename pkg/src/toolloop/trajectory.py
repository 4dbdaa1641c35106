"""Multi-turn trajectories: alternating action/observation segments over a shared token stream.

A trajectory interleaves policy-generated actions with tool-produced
observations. Token sequences are built incrementally: each segment is
tokenized on its own and appended, so earlier token ids never change when
later segments arrive. Re-tokenizing the concatenated text would let merge
rules fire across segment boundaries and silently shift the loss mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Literal

from .errors import AlternationViolation, AmbiguousStopToken
from .tokenizer import Tokenizer

SegmentOrigin = Literal["action", "observation"]

ACTION: SegmentOrigin = "action"
OBSERVATION: SegmentOrigin = "observation"


@dataclass
class Segment:
    origin: SegmentOrigin
    text: str
    tokens: list[int]


@dataclass
class Trajectory:
    """Alternating segments, starting with an action.

    ``terminated`` trajectories end on an action segment: the final policy
    output is always recorded, while an observation is only appended when the
    episode continues past it.
    """

    segments: list[Segment] = field(default_factory=list)
    terminated: bool = False
    termination_cause: str | None = None

    @property
    def turn_count(self) -> int:
        return sum(1 for s in self.segments if s.origin == OBSERVATION)

    @property
    def last_origin(self) -> SegmentOrigin | None:
        return self.segments[-1].origin if self.segments else None

    def text(self) -> str:
        return "".join(s.text for s in self.segments)


@dataclass(frozen=True)
class StopTokenSet:
    """Stop strings owned by one tool; matching one routes the action to it."""

    tool_id: str
    stops: tuple[str, ...]


def validate_suffix_free(stop_sets: Iterable[StopTokenSet]) -> None:
    """Reject stop-string unions where one stop is a suffix of another.

    Suffix-freeness is what makes routing unambiguous: two distinct stops can
    only match the same text ending if one is a suffix of the other.
    """
    seen: list[tuple[str, str]] = []
    for ss in stop_sets:
        for stop in ss.stops:
            if not stop:
                raise AmbiguousStopToken(f"tool {ss.tool_id!r} declares an empty stop string")
            for other_tool, other in seen:
                if stop.endswith(other) or other.endswith(stop):
                    raise AmbiguousStopToken(
                        f"stop {stop!r} (tool {ss.tool_id!r}) conflicts with "
                        f"{other!r} (tool {other_tool!r})"
                    )
            seen.append((ss.tool_id, stop))


def detect_stop(text: str, stop_sets: Iterable[StopTokenSet]) -> tuple[str, str] | None:
    """Return (tool_id, stop) when ``text`` ends with a registered stop string.

    Assumes the union of stops is suffix-free, so at most one stop can match.
    Returns None when the action ends without any stop string (a plain answer).
    """
    for ss in stop_sets:
        for stop in ss.stops:
            if text.endswith(stop):
                return ss.tool_id, stop
    return None


def _tokenize(
    tokenizer: Tokenizer, text: str, max_tokens: int | None
) -> tuple[str, list[int]]:
    tokens = tokenizer.encode(text)
    if max_tokens is not None and len(tokens) > max_tokens:
        tokens = tokens[:max_tokens]
        text = tokenizer.decode(tokens)
    return text, tokens


def append_segment(
    traj: Trajectory, origin: SegmentOrigin, text: str, tokens: list[int]
) -> Segment:
    """Append a pre-tokenized segment, enforcing alternation.

    Callers that truncate by token count should pass the truncated token list
    with its decoded text rather than re-encoding the decoded text, since
    re-encoding can merge across the cut and change ids.
    """
    if traj.terminated:
        raise AlternationViolation("cannot append to a terminated trajectory")
    if origin == ACTION and traj.last_origin == ACTION:
        raise AlternationViolation("two consecutive action segments")
    if origin == OBSERVATION and traj.last_origin != ACTION:
        raise AlternationViolation("observation must follow an action")
    seg = Segment(origin, text, tokens)
    traj.segments.append(seg)
    return seg


def append_action(
    traj: Trajectory,
    text: str,
    tokenizer: Tokenizer,
    max_tokens: int | None = None,
) -> Segment:
    text, tokens = _tokenize(tokenizer, text, max_tokens)
    return append_segment(traj, ACTION, text, tokens)


def append_observation(
    traj: Trajectory,
    text: str,
    tokenizer: Tokenizer,
    max_tokens: int | None = None,
) -> Segment:
    text, tokens = _tokenize(tokenizer, text, max_tokens)
    return append_segment(traj, OBSERVATION, text, tokens)


def terminate(traj: Trajectory, cause: str) -> None:
    if traj.terminated:
        raise AlternationViolation("trajectory already terminated")
    traj.terminated = True
    traj.termination_cause = cause


def flatten(traj: Trajectory) -> list[int]:
    """Concatenate per-segment token lists in order."""
    out: list[int] = []
    for seg in traj.segments:
        out.extend(seg.tokens)
    return out


def action_mask(traj: Trajectory) -> list[int]:
    """1 for every action token, 0 for every observation token, aligned with flatten()."""
    out: list[int] = []
    for seg in traj.segments:
        out.extend([1 if seg.origin == ACTION else 0] * len(seg.tokens))
    return out


def trajectory_to_dict(traj: Trajectory) -> dict[str, Any]:
    return {
        "segments": [
            {"origin": s.origin, "text": s.text, "tokens": list(s.tokens)}
            for s in traj.segments
        ],
        "turn_count": traj.turn_count,
        "terminated": traj.terminated,
        "termination_cause": traj.termination_cause,
    }


def trajectory_from_dict(data: dict[str, Any]) -> Trajectory:
    traj = Trajectory()
    prev: SegmentOrigin | None = None
    for i, raw in enumerate(data["segments"]):
        origin = raw["origin"]
        if origin not in (ACTION, OBSERVATION):
            raise ValueError(f"segment {i}: unknown origin {origin!r}")
        if origin == prev or (prev is None and origin != ACTION):
            raise AlternationViolation(f"segment {i}: broken alternation")
        traj.segments.append(Segment(origin, raw["text"], [int(t) for t in raw["tokens"]]))
        prev = origin
    traj.terminated = bool(data.get("terminated", False))
    traj.termination_cause = data.get("termination_cause")
    declared = data.get("turn_count")
    if declared is not None and int(declared) != traj.turn_count:
        raise ValueError(
            f"turn_count {declared} does not match {traj.turn_count} observation segments"
        )
    return traj
