"""Shared temporal data model and the two feature transforms every
downstream stage consumes: standardization to sigma units and the
3-month rolling local trend.

Convention: standard deviations are population (divide by n), so a
standardized series has unit variance exactly. The convention is recorded
on the output so values can be round-tripped.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import UnknownSeverityLevel, ZeroVariance
from .months import MonthIndex

SD_CONVENTION = "population"


@dataclass(frozen=True)
class MonthlyPanel:
    """Aligned per-month vectors: counts, nowcast counts, exposure, media.

    All vectors share the panel's month axis. ``nowcast_count`` equals
    ``raw_count`` until a nowcast correction is applied. ``exposure`` and
    ``media_index`` are optional until their stages run; months without
    exposure coverage are flagged in ``exposure_mask``.
    """

    months: tuple[MonthIndex, ...]
    raw_count: np.ndarray
    nowcast_count: np.ndarray
    exposure: np.ndarray | None = None
    exposure_mask: np.ndarray | None = None
    media_index: np.ndarray | None = None
    severity_sum: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.months)
        for name in ("raw_count", "nowcast_count", "exposure", "exposure_mask",
                     "media_index", "severity_sum"):
            vec = getattr(self, name)
            if vec is not None and len(vec) != n:
                raise ValueError(f"{name} has length {len(vec)}, panel has {n} months")
        if np.any(self.raw_count < 0):
            raise ValueError("raw counts must be non-negative")
        if np.any(self.nowcast_count < np.asarray(self.raw_count) - 1e-9):
            raise ValueError("nowcast counts may not fall below raw counts")

    @property
    def n_months(self) -> int:
        return len(self.months)

    def month_position(self, month: MonthIndex) -> int:
        pos = month - self.months[0]
        if pos < 0 or pos >= self.n_months or self.months[pos] != month:
            raise KeyError(f"{month} not in panel")
        return pos

    def with_nowcast(self, nowcast: np.ndarray) -> "MonthlyPanel":
        return replace(self, nowcast_count=np.asarray(nowcast, dtype=float))

    def with_exposure(self, exposure: np.ndarray, mask: np.ndarray) -> "MonthlyPanel":
        return replace(self, exposure=np.asarray(exposure, dtype=float),
                       exposure_mask=np.asarray(mask, dtype=bool))

    def with_media(self, media: np.ndarray) -> "MonthlyPanel":
        return replace(self, media_index=np.asarray(media, dtype=float))


@dataclass(frozen=True)
class RiskSeries:
    """Standardized risk (sigma units) plus its 3-month rolling local trend."""

    months: tuple[MonthIndex, ...]
    z: np.ndarray
    slope: np.ndarray
    window_mean: float
    window_sd: float
    sd_convention: str = SD_CONVENTION

    def unstandardize(self) -> np.ndarray:
        return self.z * self.window_sd + self.window_mean

    def subset(self, start: int, end: int) -> "RiskSeries":
        """Slice [start, end) keeping the original standardization constants."""
        return RiskSeries(self.months[start:end], self.z[start:end],
                          self.slope[start:end], self.window_mean, self.window_sd,
                          self.sd_convention)


#: Modified KABCO-style severity weights, strictly increasing with level.
SEVERITY_WEIGHTS: dict[str, float] = {
    "Negligible": 1.0,
    "Minor": 3.0,
    "Substantial": 10.0,
    "Severe": 50.0,
}


@dataclass(frozen=True)
class SeverityScale:
    weights: dict[str, float] = field(default_factory=lambda: dict(SEVERITY_WEIGHTS))

    def weight(self, level: str) -> float:
        try:
            return self.weights[level]
        except KeyError:
            raise UnknownSeverityLevel(f"severity level {level!r} not in scale") from None


def standardize(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Map a series to z-scores using its own mean and population sd.

    Returns (z, mean, sd) so the transform can be inverted. Raises
    ZeroVariance on a constant series, which signals a degenerate signal
    rather than a recoverable condition.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValueError("standardize requires at least 2 points")
    mean = float(np.mean(x))
    sd = float(np.std(x))  # population: ddof=0
    if sd == 0.0:
        raise ZeroVariance("series is constant; z-scores undefined")
    return (x - mean) / sd, mean, sd


def rolling_slope(values: np.ndarray, window: int = 3) -> np.ndarray:
    """Per-point OLS slope over the trailing `window` observations.

    The window at position t is values[t-window+1 .. t] regressed on
    0..window-1. Truncated head windows use the points available (>= 2);
    the very first point gets slope 0 so the output stays full-length.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    x = np.asarray(values, dtype=float)
    n = x.size
    out = np.zeros(n)
    for t in range(1, n):
        lo = max(0, t - window + 1)
        seg = x[lo:t + 1]
        idx = np.arange(seg.size, dtype=float)
        # OLS slope = cov(idx, seg) / var(idx)
        idx_c = idx - idx.mean()
        out[t] = float(idx_c @ (seg - seg.mean()) / (idx_c @ idx_c))
    return out


def risk_series(months: tuple[MonthIndex, ...], values: np.ndarray,
                window: int = 3) -> RiskSeries:
    """Standardize a signal and attach its rolling local trend."""
    z, mean, sd = standardize(values)
    return RiskSeries(tuple(months), z, rolling_slope(z, window), mean, sd)


def severity_sum(levels: list[str], scale: SeverityScale | None = None) -> float:
    """Sum of mapped severity weights for one month's records."""
    sc = scale or SeverityScale()
    return float(sum(sc.weight(lv) for lv in levels))
