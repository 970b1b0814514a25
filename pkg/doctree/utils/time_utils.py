"""Helpers for timestamps recorded in run manifests and the run registry.

Every timestamp is stored as a timezone-aware UTC datetime and serialized
as ISO 8601 so manifests compare cleanly across machines.
"""
from datetime import datetime, timezone


def get_now_utc() -> datetime:
    """Return the current date and time in UTC (timezone-aware).

    This is the standard way of reading the clock in the project.

    Returns:
        datetime: Current UTC time with tzinfo set.

    Example:
        >>> now = get_now_utc()
        >>> print(now.tzinfo)
        UTC
    """
    return datetime.now(timezone.utc)


def format_timestamp(value: datetime) -> str:
    """Serialize an aware datetime as ISO 8601 in UTC.

    Args:
        value: Datetime to serialize. Must be timezone-aware.

    Returns:
        str: ISO 8601 string with a ``+00:00`` offset.

    Raises:
        ValueError: If ``value`` has no tzinfo.
    """
    if value.tzinfo is None:
        raise ValueError(
            "value must be timezone-aware. "
            "Build it with tzinfo=timezone.utc or get_now_utc()."
        )
    return value.astimezone(timezone.utc).isoformat()
