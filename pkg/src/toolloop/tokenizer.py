"""Byte-level tokenizer with an ordered merge table.

The point of the toy tokenizer is that token boundaries depend on context:
encoding an action and an observation separately can yield a different token
sequence than encoding their concatenation, because a merge rule may fire
across the boundary. The trajectory layer relies on this to demonstrate why
segments must be tokenized incrementally, never re-tokenized as one string.
"""

from __future__ import annotations

from typing import Protocol, Sequence


class Tokenizer(Protocol):
    """Minimal tokenizer surface the trajectory layer depends on."""

    def encode(self, text: str) -> list[int]: ...

    def decode(self, tokens: Sequence[int]) -> str: ...

    @property
    def vocab_size(self) -> int: ...


# Each pair merges two existing tokens into a new one; order matters because a
# later rule may consume ids produced by an earlier one. The (">", "\n") rule
# is the canonical boundary-crossing merge: an action ending in ">" followed by
# an observation starting with "\n" tokenizes differently joint vs. split.
DEFAULT_MERGES: tuple[tuple[str, str], ...] = (
    (">", "\n"),
    ("<", "/"),
    ("\n", "<"),
    ("e", "r"),
)


class ToyMergeTokenizer:
    """Byte-level tokenizer (ids 0..255) plus an ordered merge table.

    Rules are applied one at a time in table order; each rule makes a single
    left-to-right pass over the current token sequence, merging every adjacent
    occurrence of its pair. Rule k produces token id 256 + k.
    """

    def __init__(self, merges: Sequence[tuple[str, str]] = DEFAULT_MERGES):
        self._token_bytes: list[bytes] = [bytes([i]) for i in range(256)]
        self._rules: list[tuple[int, int, int]] = []
        by_bytes = {bs: i for i, bs in enumerate(self._token_bytes)}
        for left, right in merges:
            left_b, right_b = left.encode("utf-8"), right.encode("utf-8")
            if left_b not in by_bytes or right_b not in by_bytes:
                raise ValueError(
                    f"merge ({left!r}, {right!r}) references a token that does not exist yet"
                )
            new_id = len(self._token_bytes)
            self._rules.append((by_bytes[left_b], by_bytes[right_b], new_id))
            merged = left_b + right_b
            self._token_bytes.append(merged)
            by_bytes[merged] = new_id

    @property
    def vocab_size(self) -> int:
        return len(self._token_bytes)

    def encode(self, text: str) -> list[int]:
        ids = list(text.encode("utf-8"))
        for left, right, new_id in self._rules:
            merged: list[int] = []
            i = 0
            while i < len(ids):
                if i + 1 < len(ids) and ids[i] == left and ids[i + 1] == right:
                    merged.append(new_id)
                    i += 2
                else:
                    merged.append(ids[i])
                    i += 1
            ids = merged
        return ids

    def decode(self, tokens: Sequence[int]) -> str:
        # errors="replace" so that decoding a truncated sequence that splits a
        # multi-byte character degrades gracefully instead of raising.
        return b"".join(self._token_bytes[t] for t in tokens).decode(
            "utf-8", errors="replace"
        )
