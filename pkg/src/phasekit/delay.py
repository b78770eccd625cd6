"""Reporting-lag modeling and nowcast correction.

Lags are measured in days between an incident and each of its reports.
Negative lags and lags beyond five years are excluded as invalid. Three
parametric families (lognormal, exponential, Weibull) are fitted by
maximum likelihood and compared by AIC; the empirical lag CDF in months
drives the nowcast inflation of recent under-reported counts, capped at
a configurable factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np
from scipy.optimize import brentq

from .core import MonthlyPanel
from .errors import InsufficientData, NonPositiveLag
from .ingest import IncidentRecord
from .months import MonthIndex

MAX_LAG_DAYS = 1826  # five years
MIN_LAGS = 10
DAYS_PER_MONTH = 30.44
ZERO_LAG_SHIFT = 0.5  # continuity correction applied to zero-day lags

DelayFamily = Literal["lognormal", "exponential", "weibull"]


@dataclass(frozen=True)
class LagData:
    lag_days: np.ndarray
    excluded: int

    @property
    def excluded_fraction(self) -> float:
        total = self.lag_days.size + self.excluded
        return self.excluded / total if total else 0.0


@dataclass(frozen=True)
class DelayModel:
    family: DelayFamily
    params: dict[str, float]
    loglik: float
    aic: float
    n_valid: int
    excluded_fraction: float
    shifted_zeros: int = 0
    degenerate: bool = False
    empirical_mean_days: float = float("nan")
    model_mean_days: float = float("nan")


@dataclass(frozen=True)
class NowcastAdjustment:
    """Empirical reporting-completeness CDF over horizons 0..window_months.

    ``cdf[h]`` is the fraction of lags at most h months; the inflation
    factor for a month at horizon h is min(1/cdf[h], cap), so a horizon
    with no observed reporting mass inflates by exactly the cap.
    """

    window_months: int
    cdf: np.ndarray
    cap: float = 5.0

    def __post_init__(self):
        c = np.asarray(self.cdf, dtype=float)
        if c.size != self.window_months + 1:
            raise ValueError("cdf must cover horizons 0..window_months")
        if np.any(np.diff(c) < -1e-12) or c[-1] > 1 + 1e-12 or c[0] < 0:
            raise ValueError("cdf must be monotone non-decreasing within [0, 1]")

    def inflation_factor(self, horizon: int) -> float:
        if horizon < 0 or horizon > self.window_months:
            return 1.0
        f = self.cdf[horizon]
        if f <= 1.0 / self.cap:
            return self.cap
        return min(1.0 / f, self.cap)


def compute_lags(records: Iterable[IncidentRecord]) -> LagData:
    """Per-report lag in days, with invalid observations excluded and counted."""
    lags: list[float] = []
    excluded = 0
    for rec in records:
        for rep in rec.report_dates:
            lag = (rep - rec.incident_date).days
            if lag < 0 or lag > MAX_LAG_DAYS:
                excluded += 1
            else:
                lags.append(float(lag))
    return LagData(np.asarray(lags, dtype=float), excluded)


def _prepare(lags: np.ndarray) -> tuple[np.ndarray, int]:
    """Shift zero-day lags by the continuity correction; count how many."""
    x = np.asarray(lags, dtype=float)
    zeros = int(np.sum(x == 0))
    if zeros:
        x = np.where(x == 0, ZERO_LAG_SHIFT, x)
    return x, zeros


def _fit_lognormal(x: np.ndarray) -> tuple[dict[str, float], float, bool]:
    if np.any(x <= 0):
        raise NonPositiveLag("lognormal fit requires strictly positive lags")
    logs = np.log(x)
    mu = float(np.mean(logs))
    sigma = float(np.std(logs))
    degenerate = sigma < 1e-8
    sigma = max(sigma, 1e-8)
    n = x.size
    loglik = float(-np.sum(np.log(x)) - n * math.log(sigma * math.sqrt(2 * math.pi))
                   - np.sum((logs - mu) ** 2) / (2 * sigma**2))
    return {"mu": mu, "sigma": sigma}, loglik, degenerate


def _fit_exponential(x: np.ndarray) -> tuple[dict[str, float], float, bool]:
    mean = float(np.mean(x))
    if mean <= 0:
        raise NonPositiveLag("exponential fit requires positive mean lag")
    rate = 1.0 / mean
    loglik = float(x.size * math.log(rate) - rate * np.sum(x))
    return {"rate": rate}, loglik, False


def _weibull_profile_root(x: np.ndarray, k: float) -> float:
    xk = x**k
    return float(np.sum(xk * np.log(x)) / np.sum(xk) - 1.0 / k - np.mean(np.log(x)))


def _fit_weibull(x: np.ndarray) -> tuple[dict[str, float], float, bool]:
    """Weibull MLE via 1-D profile likelihood on the shape parameter."""
    if np.any(x <= 0):
        raise NonPositiveLag("weibull fit requires strictly positive lags")
    lo, hi = 1e-3, 1.0
    # expand until the profile equation brackets a root
    while _weibull_profile_root(x, hi) < 0 and hi < 1e3:
        hi *= 2.0
    degenerate = False
    try:
        shape = float(brentq(lambda k: _weibull_profile_root(x, k), lo, hi, xtol=1e-8))
    except ValueError:
        shape, degenerate = hi, True
    scale = float(np.mean(x**shape) ** (1.0 / shape))
    n = x.size
    loglik = float(n * math.log(shape) - n * shape * math.log(scale)
                   + (shape - 1) * np.sum(np.log(x)) - np.sum((x / scale) ** shape))
    return {"shape": shape, "scale": scale}, loglik, degenerate


_FITTERS = {
    "lognormal": (_fit_lognormal, 2),
    "exponential": (_fit_exponential, 1),
    "weibull": (_fit_weibull, 2),
}


def _model_mean(family: DelayFamily, params: dict[str, float]) -> float:
    if family == "lognormal":
        return math.exp(params["mu"] + params["sigma"] ** 2 / 2)
    if family == "exponential":
        return 1.0 / params["rate"]
    return params["scale"] * math.gamma(1.0 + 1.0 / params["shape"])


def fit_delay(lags: np.ndarray, family: DelayFamily,
              excluded_fraction: float = 0.0) -> DelayModel:
    """Maximum-likelihood fit of one delay family; AIC = 2k − 2·loglik."""
    x, zeros = _prepare(lags)
    if x.size < MIN_LAGS:
        raise InsufficientData(f"need >= {MIN_LAGS} lags, got {x.size}")
    fitter, k = _FITTERS[family]
    params, loglik, degenerate = fitter(x)
    if x.size == MIN_LAGS:
        degenerate = True  # minimum-n fits are flagged, not trusted
    return DelayModel(
        family=family, params=params, loglik=loglik, aic=2 * k - 2 * loglik,
        n_valid=int(x.size), excluded_fraction=excluded_fraction,
        shifted_zeros=zeros, degenerate=degenerate,
        empirical_mean_days=float(np.mean(lags)),
        model_mean_days=_model_mean(family, params),
    )


def select_delay_model(lags: np.ndarray,
                       excluded_fraction: float = 0.0) -> tuple[DelayModel, dict[str, DelayModel]]:
    """Fit all three families and return the minimum-AIC model plus the table.

    Ties (within 1e-9) break toward lognormal, the heavier-tailed default
    for media-report delays.
    """
    fits = {fam: fit_delay(lags, fam, excluded_fraction) for fam in _FITTERS}
    best = min(fits.values(), key=lambda m: (m.aic, m.family != "lognormal"))
    ln = fits["lognormal"]
    if abs(ln.aic - best.aic) < 1e-9:
        best = ln
    return best, fits


def lag_days_to_months(lag_days: np.ndarray) -> np.ndarray:
    return np.floor(np.asarray(lag_days, dtype=float) / DAYS_PER_MONTH).astype(int)


def build_nowcast(lag_days: np.ndarray, percentile: float = 0.95,
                  cap: float = 5.0) -> NowcastAdjustment:
    """Empirical nowcast window and completeness CDF from observed lags.

    The window is the ceiling of the given percentile of lags expressed in
    months (floor(days / 30.44)); F(h) is the fraction of lags at most h
    months.
    """
    lags = np.asarray(lag_days, dtype=float)
    if lags.size == 0:
        raise InsufficientData("cannot build a nowcast from zero lags")
    months = lag_days_to_months(lags)
    hstar = int(math.ceil(float(np.percentile(months, percentile * 100))))
    cdf = np.array([np.mean(months <= h) for h in range(hstar + 1)], dtype=float)
    return NowcastAdjustment(window_months=hstar, cdf=cdf, cap=cap)


def apply_nowcast(panel: MonthlyPanel, adj: NowcastAdjustment,
                  as_of: MonthIndex) -> MonthlyPanel:
    """Inflate recent raw counts by the expected unreported fraction.

    Months at horizon h = as_of − month within the nowcast window become
    raw · min(1/F(h), cap); older months keep their raw counts.
    """
    if as_of < panel.months[-1]:
        raise ValueError("as_of must not precede the last panel month")
    nowcast = panel.raw_count.astype(float).copy()
    for i, month in enumerate(panel.months):
        h = as_of - month
        if h <= adj.window_months:
            nowcast[i] = panel.raw_count[i] * adj.inflation_factor(h)
    return panel.with_nowcast(nowcast)
