"""UTC instants with millisecond precision, formatted ISO-8601 with trailing Z."""

from __future__ import annotations

from datetime import datetime, timezone

UTC = timezone.utc


def truncate_ms(dt: datetime) -> datetime:
    """Drop sub-millisecond precision; instants never carry it."""
    return dt.replace(microsecond=dt.microsecond - dt.microsecond % 1000)


def as_utc_ms(dt: datetime) -> datetime:
    """Normalize an aware datetime to a UTC instant at millisecond precision."""
    if dt.tzinfo is None:
        raise ValueError("naive datetime; instants must be timezone-aware")
    return truncate_ms(dt.astimezone(UTC))


def format_instant(dt: datetime) -> str:
    """Canonical form: YYYY-MM-DDTHH:MM:SS.mmmZ (always three fraction digits)."""
    dt = as_utc_ms(dt)
    return (
        f"{dt.year:04d}-{dt.month:02d}-{dt.day:02d}"
        f"T{dt.hour:02d}:{dt.minute:02d}:{dt.second:02d}"
        f".{dt.microsecond // 1000:03d}Z"
    )


def parse_instant(text: str) -> datetime:
    """Parse an ISO-8601 instant; tolerates offsets other than Z, normalizes to UTC ms.

    Raises ValueError for unparseable input or naive timestamps.
    """
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp without offset: {text!r}")
    return as_utc_ms(dt)


def utc_now() -> datetime:
    return truncate_ms(datetime.now(UTC))
