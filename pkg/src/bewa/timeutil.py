"""Timestamp helpers.  The engine works in integer epoch seconds."""

from __future__ import annotations

from datetime import datetime, timezone

DAY = 86400


def parse_time(value: str | int | float) -> int:
    """Accept epoch seconds or an RFC 3339 string and return epoch seconds."""
    if isinstance(value, bool):
        raise ValueError("boolean is not a timestamp")
    if isinstance(value, (int, float)):
        return int(value)
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_time(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def days(seconds: float) -> float:
    return seconds / DAY
