import numpy as np
import pytest

from phasekit.core import MonthlyPanel, risk_series
from phasekit.months import MonthIndex, month_range


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_months(n, year=2020, month=1):
    start = MonthIndex(year, month)
    return tuple(month_range(start, start.shift(n - 1)))


def make_panel(counts, exposure=None, media=None, year=2020, month=1):
    counts = np.asarray(counts)
    months = make_months(len(counts), year, month)
    panel = MonthlyPanel(months, counts.astype(int), counts.astype(float))
    if exposure is not None:
        panel = panel.with_exposure(np.asarray(exposure, dtype=float),
                                    np.asarray(exposure, dtype=float) > 0)
    if media is not None:
        panel = panel.with_media(np.asarray(media, dtype=float))
    return panel


def make_risk(values, year=2020, month=1):
    values = np.asarray(values, dtype=float)
    return risk_series(make_months(len(values), year, month), values)
