"""Exposure denominators: external series, depreciated installed base,
range scaling, and exposure-adjusted incident rates.

The depreciated installed base converts discrete adoption events (e.g.
repository star additions) into a persistence-weighted stock: each event
contributes stars · 0.5^(age / half_life) from its event month onward.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Iterable, Literal, TextIO

import numpy as np
from scipy import stats as sps

from .core import MonthlyPanel
from .errors import ConstantIndex, MissingExposure, NoOverlap, SchemaMismatch
from .months import MonthIndex, month_range


@dataclass(frozen=True)
class StarEvent:
    repo: str
    event_month: MonthIndex
    stars_added: float


@dataclass(frozen=True)
class ExposureIndex:
    months: tuple[MonthIndex, ...]
    value: np.ndarray
    source: Literal["external", "depreciated-installed-base"]
    half_life_months: float | None = None
    scaled_to: tuple[float, float] | None = None

    def __post_init__(self):
        if len(self.value) != len(self.months):
            raise ValueError("value vector must align with months")


def load_star_events(stream: TextIO) -> list[StarEvent]:
    reader = csv.DictReader(stream)
    header = reader.fieldnames or []
    required = ("repo", "event_month", "stars_added")
    if any(c not in header for c in required):
        raise SchemaMismatch(f"expected columns {required}, got {header}")
    return [StarEvent(row["repo"], MonthIndex.parse(row["event_month"]),
                      float(row["stars_added"])) for row in reader]


def depreciated_installed_base(events: Iterable[StarEvent], half_life_months: float,
                               start: MonthIndex, end: MonthIndex) -> ExposureIndex:
    """Half-life-depreciated cumulative adoption stock per month.

    value(t) = sum over events with event_month <= t of
    stars_added · 0.5^((t − event_month) / half_life).
    """
    if half_life_months <= 0:
        raise ValueError("half_life_months must be positive")
    months = month_range(start, end)
    origin = months[0]
    value = np.zeros(len(months))
    for ev in events:
        offset = ev.event_month - origin  # may be negative for pre-range events
        ages = np.arange(len(months)) - offset
        active = ages >= 0
        value[active] += ev.stars_added * 0.5 ** (ages[active] / half_life_months)
    return ExposureIndex(tuple(months), value, "depreciated-installed-base",
                         half_life_months=half_life_months)


def scale_range(index: ExposureIndex, lo: float = 10.0, hi: float = 100.0) -> ExposureIndex:
    """Affine min-max map of the index onto [lo, hi]."""
    vmin, vmax = float(np.min(index.value)), float(np.max(index.value))
    if vmax == vmin:
        raise ConstantIndex("cannot min-max scale a constant index")
    scaled = lo + (index.value - vmin) * (hi - lo) / (vmax - vmin)
    return replace(index, value=scaled, scaled_to=(lo, hi))


def merge_external(panel: MonthlyPanel,
                   series: dict[MonthIndex, float]) -> MonthlyPanel:
    """Attach an external exposure series to the panel months it covers.

    Months outside the series' coverage get exposure 0 and a False mask
    entry; downstream offset fits must restrict to masked-True months.
    """
    exposure = np.zeros(panel.n_months)
    mask = np.zeros(panel.n_months, dtype=bool)
    for i, month in enumerate(panel.months):
        if month in series:
            exposure[i] = series[month]
            mask[i] = series[month] > 0
    if not mask.any():
        raise NoOverlap("exposure series does not overlap the panel")
    return panel.with_exposure(exposure, mask)


def attach_index(panel: MonthlyPanel, index: ExposureIndex) -> MonthlyPanel:
    """Attach a constructed ExposureIndex (full coverage expected)."""
    series = dict(zip(index.months, index.value))
    return merge_external(panel, series)


def ols_trend(y: np.ndarray) -> tuple[float, float]:
    """Classical OLS slope of y on 0..n−1 with its two-sided p-value."""
    y = np.asarray(y, dtype=float)
    n = y.size
    t = np.arange(n, dtype=float)
    tc = t - t.mean()
    slope = float(tc @ (y - y.mean()) / (tc @ tc))
    resid = y - (y.mean() + slope * tc)
    df = n - 2
    if df <= 0:
        return slope, float("nan")
    s2 = float(resid @ resid) / df
    se = np.sqrt(s2 / (tc @ tc))
    if se == 0:
        return slope, 0.0 if slope != 0 else 1.0
    tstat = slope / se
    return slope, float(2 * sps.t.sf(abs(tstat), df))


@dataclass(frozen=True)
class RateSummary:
    months: tuple[MonthIndex, ...]
    rate: np.ndarray
    per: float
    trend_slope: float
    trend_p: float
    aggregate_rate: float
    mean_monthly_rate: float


def exposure_adjusted_rate(panel: MonthlyPanel, per: float = 1e6) -> RateSummary:
    """Per-month incident rate per `per` exposure units on covered months.

    Reports both the period-aggregate rate (total counts / total exposure)
    and the mean of monthly rates, which differ under varying exposure.
    """
    if panel.exposure is None or panel.exposure_mask is None:
        raise MissingExposure("panel has no exposure attached")
    mask = panel.exposure_mask
    if not mask.any():
        raise MissingExposure("no months with positive exposure coverage")
    counts = panel.raw_count[mask].astype(float)
    expo = panel.exposure[mask]
    rate = counts / (expo / per)
    slope, p = ols_trend(rate)
    return RateSummary(
        months=tuple(m for m, keep in zip(panel.months, mask) if keep),
        rate=rate, per=per, trend_slope=slope, trend_p=p,
        aggregate_rate=float(counts.sum() / expo.sum() * per),
        mean_monthly_rate=float(rate.mean()),
    )
