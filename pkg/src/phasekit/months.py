"""Calendar-month index arithmetic.

All temporal reasoning in the toolkit happens at month granularity:
incident dates map to their containing month and differences are counted
in whole months, ignoring day-of-month.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from functools import total_ordering


@total_ordering
@dataclass(frozen=True)
class MonthIndex:
    """A (year, month) pair with total ordering and month-difference arithmetic."""

    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be 1..12, got {self.month}")

    def __lt__(self, other: "MonthIndex") -> bool:
        return (self.year, self.month) < (other.year, other.month)

    def __sub__(self, other: "MonthIndex") -> int:
        """Difference in whole months (self − other)."""
        return (self.year - other.year) * 12 + (self.month - other.month)

    def shift(self, months: int) -> "MonthIndex":
        """Month `months` steps after self (negative shifts backward)."""
        total = self.year * 12 + (self.month - 1) + months
        return MonthIndex(total // 12, total % 12 + 1)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"

    @classmethod
    def parse(cls, text: str) -> "MonthIndex":
        """Parse 'YYYY-MM' (also accepts a full ISO date, keeping its month)."""
        parts = text.strip().split("-")
        if len(parts) < 2:
            raise ValueError(f"cannot parse month from {text!r}")
        return cls(int(parts[0]), int(parts[1]))

    @classmethod
    def from_date(cls, d: dt.date) -> "MonthIndex":
        return cls(d.year, d.month)


def month_range(start: MonthIndex, end: MonthIndex) -> list[MonthIndex]:
    """Inclusive, gap-free list of months from start to end."""
    if end < start:
        raise ValueError(f"end {end} precedes start {start}")
    return [start.shift(i) for i in range(end - start + 1)]


def parse_iso_date(text: str) -> dt.date:
    """Strict ISO-8601 date parsing; raises ValueError on malformed input."""
    return dt.date.fromisoformat(text.strip())
