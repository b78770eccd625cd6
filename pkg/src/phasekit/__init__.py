"""phasekit: incident-stream surveillance toolkit.

Converts noisy incident-report streams into delay-corrected,
exposure-normalized, media-adjusted risk signals; infers lifecycle
regimes by triangulated detection (penalized changepoints, Gaussian
HMM, feature clustering); and classifies governance phases with
sensitivity analysis, forecasting, and expert what-if support.
"""

__version__ = "0.1.0"

from .core import MonthlyPanel, RiskSeries, SeverityScale, risk_series, rolling_slope, standardize
from .months import MonthIndex, month_range

__all__ = [
    "MonthIndex",
    "MonthlyPanel",
    "RiskSeries",
    "SeverityScale",
    "month_range",
    "risk_series",
    "rolling_slope",
    "standardize",
    "__version__",
]
