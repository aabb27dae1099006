"""Date helpers: all pipeline timestamps are integer days since 1970-01-01."""

from __future__ import annotations

import datetime as _dt

_EPOCH = _dt.date(1970, 1, 1).toordinal()


def day_from_iso(date_str: str) -> int:
    """Convert an ISO date (YYYY-MM-DD) to days since epoch."""
    return _dt.date.fromisoformat(date_str).toordinal() - _EPOCH


def iso_from_day(day: int) -> str:
    """Convert days since epoch back to an ISO date string."""
    return _dt.date.fromordinal(int(day) + _EPOCH).isoformat()


def month_of_day(day: int) -> int:
    """Calendar month (1..12) of a days-since-epoch timestamp."""
    return _dt.date.fromordinal(int(day) + _EPOCH).month


def month_firsts(start_day: int, end_day: int) -> list[int]:
    """Days-since-epoch of every 1st-of-month in [start_day, end_day]."""
    firsts = []
    d = _dt.date.fromordinal(int(start_day) + _EPOCH)
    if d.day != 1:
        d = (d.replace(day=1) + _dt.timedelta(days=32)).replace(day=1)
    while d.toordinal() - _EPOCH <= end_day:
        firsts.append(d.toordinal() - _EPOCH)
        d = (d + _dt.timedelta(days=32)).replace(day=1)
    return firsts
