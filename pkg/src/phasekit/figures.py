"""Report figure rendering.

Figures are written as PNG files next to the run's delimited artifacts:
a risk overview (signal, changepoints, thresholds, phase strip), the
forecast fan, and the threshold-sweep profile with its invariant zones.
Rendering is deterministic so repeated runs produce byte-identical
files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .core import RiskSeries
from .forecast import ForecastBand
from .pelt import Segmentation
from .phases import SIX_PHASE_ORDER, THREE_PHASE_ORDER, PhaseTimeline
from .sensitivity import SweepResult

_SAVEFIG_KW = {"dpi": 110, "metadata": {"Software": "phasekit"}}

PHASE_COLORS = {
    "NoEvidencedOccurrence": "#d9d9d9",
    "RareMitigated": "#74c476",
    "RareOccurrence": "#fdd0a2",
    "EndemicMitigated": "#6baed6",
    "RapidExpansion": "#fb6a4a",
    "EndemicUnmitigated": "#a50f15",
    "DormantBaseline": "#bdbdbd",
    "ActiveOutbreak": "#fb6a4a",
}


def _month_ticks(ax, months):
    idx = np.linspace(0, len(months) - 1, min(8, len(months))).astype(int)
    ax.set_xticks(idx)
    ax.set_xticklabels([str(months[i]) for i in idx], rotation=45, ha="right", fontsize=8)


def render_risk_overview(path: Path, risk: RiskSeries, segmentation: Segmentation,
                         timeline: PhaseTimeline) -> None:
    """Risk signal with changepoints and thresholds over a phase strip."""
    fig, (ax, strip) = plt.subplots(
        2, 1, figsize=(10, 5.5), gridspec_kw={"height_ratios": [4, 1]}, sharex=True)
    x = np.arange(len(risk.months))
    ax.plot(x, risk.z, color="#333333", lw=1.2, label="standardized risk")
    for cp in segmentation.changepoints:
        ax.axvline(cp, color="#cb181d", ls="--", lw=1.0)
    th = timeline.thresholds
    ax.axhline(th.theta_low, color="#6baed6", ls=":", lw=1.0,
               label=f"theta_low {th.theta_low:+.2f}")
    ax.axhline(th.theta_high, color="#2171b5", ls=":", lw=1.0,
               label=f"theta_high {th.theta_high:+.2f}")
    ax.axhline(th.spc_epidemic, color="#fd8d3c", ls="--", lw=1.0,
               label="epidemic (+2 sd)")
    for seg in segmentation.segments:
        ax.hlines(seg.mean, seg.start, seg.end - 1, color="#cb181d", lw=2.0, alpha=0.7)
    ax.set_ylabel("risk (sigma)")
    ax.legend(loc="upper left", fontsize=8, frameon=False)

    for i, ph in enumerate(timeline.three_phase):
        strip.axvspan(i - 0.5, i + 0.5, color=PHASE_COLORS[ph.value], lw=0)
    strip.set_yticks([])
    strip.set_ylabel("phase", fontsize=8)
    _month_ticks(strip, risk.months)
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)


def render_forecast(path: Path, history: np.ndarray, months, band: ForecastBand) -> None:
    fig, ax = plt.subplots(figsize=(10, 4))
    n = history.size
    ax.plot(np.arange(n), history, color="#333333", lw=1.2, label="nowcast counts")
    fx = np.arange(n, n + band.point.size)
    ax.plot(fx, band.point, color="#cb181d", lw=1.4, label="forecast")
    ax.fill_between(fx, band.lower95, band.upper95, color="#cb181d", alpha=0.18,
                    label="95% band")
    ax.axvline(n - 0.5, color="#999999", ls=":", lw=1.0)
    ax.set_ylabel("incidents / month")
    ax.legend(loc="upper left", fontsize=8, frameon=False)
    _month_ticks(ax, list(months) + [f"+{h}" for h in band.horizons])
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)


def render_threshold_sweep(path: Path, sweep: SweepResult) -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    thetas = [o["theta_low"] for o in sweep.outcomes]
    dormant = [o["dormant_pct"] for o in sweep.outcomes]
    ax.step(thetas, dormant, where="post", color="#333333", lw=1.4)
    ax.set_xlabel("theta_low (sigma)")
    ax.set_ylabel("dormant months (%)")
    for lo, hi in sweep.invariant_zones:
        ax.axvspan(lo, hi, color="#74c476", alpha=0.15)
    ax.set_title("classification stability across theta_low", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)


def render_phase_distribution(path: Path, timeline: PhaseTimeline) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.2))
    for ax, dist, order, title in (
            (axes[0], timeline.distribution_six, SIX_PHASE_ORDER, "six-phase"),
            (axes[1], timeline.distribution_three, THREE_PHASE_ORDER, "three-phase")):
        names = [ph.value for ph in order]
        pcts = [dist.get(n, (0, 0.0))[1] for n in names]
        colors = [PHASE_COLORS[n] for n in names]
        ax.barh(range(len(names)), pcts, color=colors)
        ax.set_yticks(range(len(names)))
        ax.set_yticklabels(names, fontsize=7)
        ax.invert_yaxis()
        ax.set_xlabel("% of months", fontsize=8)
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)
