"""Small text helpers shared by server and plugins."""

from __future__ import annotations

TRUNCATION_MARKER = "\n...[truncated]"


def cap_bytes(text: str, cap: int, marker: str = TRUNCATION_MARKER) -> str:
    """Truncate text so its UTF-8 encoding fits in cap bytes.

    When truncation happens the marker is appended within the budget. Cut
    points never split a multi-byte character.
    """
    raw = text.encode("utf-8")
    if len(raw) <= cap:
        return text
    marker_raw = marker.encode("utf-8")
    keep = cap - len(marker_raw)
    if keep <= 0:
        return raw[:cap].decode("utf-8", errors="ignore")
    return raw[:keep].decode("utf-8", errors="ignore") + marker
