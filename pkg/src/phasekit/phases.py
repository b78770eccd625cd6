"""Governance phase classification from (risk level, local trend).

Two frameworks are supported: the full six-phase lifecycle and the
simplified three-phase variant with SPC control limits. Rules are
evaluated in table order, which resolves the overlap between the
Rare Occurrence and Rapid Expansion rows (low-risk rising months stay
Rare Occurrence). Boundary conventions: r < theta_low strict,
r >= theta_high inclusive, trend <= trend_cut inclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import MonthlyPanel, RiskSeries
from .errors import Unclassifiable, WindowTooShort
from .months import MonthIndex
from .pelt import Segmentation


class SixPhase(str, Enum):
    NO_EVIDENCED_OCCURRENCE = "NoEvidencedOccurrence"
    RARE_MITIGATED = "RareMitigated"
    RARE_OCCURRENCE = "RareOccurrence"
    ENDEMIC_MITIGATED = "EndemicMitigated"
    RAPID_EXPANSION = "RapidExpansion"
    ENDEMIC_UNMITIGATED = "EndemicUnmitigated"


class ThreePhase(str, Enum):
    DORMANT_BASELINE = "DormantBaseline"
    ACTIVE_OUTBREAK = "ActiveOutbreak"
    ENDEMIC_UNMITIGATED = "EndemicUnmitigated"


SIX_PHASE_ORDER = tuple(SixPhase)
THREE_PHASE_ORDER = tuple(ThreePhase)

TREND_CUT = 0.05
RAPID_FLOOR = 0.05
SEGMENT_ZERO_RULE = 0.5  # mean incidents/month below this reads as no evidence


@dataclass(frozen=True)
class PhaseThresholds:
    theta_low: float
    theta_high: float
    trend_cut: float = TREND_CUT
    rapid_cut: float = RAPID_FLOOR
    spc_mean: float = 0.0
    spc_sd: float = 1.0
    zero_month_rule: float = 0.0  # month-level count at or below this is "no evidence"

    def __post_init__(self):
        if not self.theta_low < self.theta_high:
            raise ValueError("theta_low must be below theta_high")
        if self.spc_sd <= 0:
            raise ValueError("spc_sd must be positive")

    @property
    def spc_epidemic(self) -> float:
        return self.spc_mean + 2.0 * self.spc_sd

    @property
    def spc_acute(self) -> float:
        return self.spc_mean + 3.0 * self.spc_sd


def classify_six(count: float, r: float, tau: float, th: PhaseThresholds) -> SixPhase:
    """Six-phase rule table, first match wins."""
    if count <= th.zero_month_rule:
        return SixPhase.NO_EVIDENCED_OCCURRENCE
    if r < th.theta_low and tau <= th.trend_cut:
        return SixPhase.RARE_MITIGATED
    if r < th.theta_low and tau > th.trend_cut:
        return SixPhase.RARE_OCCURRENCE
    if th.theta_low <= r < th.theta_high and tau <= th.trend_cut:
        return SixPhase.ENDEMIC_MITIGATED
    if tau > th.trend_cut:
        return SixPhase.RAPID_EXPANSION
    if r >= th.theta_high and tau <= th.trend_cut:
        return SixPhase.ENDEMIC_UNMITIGATED
    raise Unclassifiable(f"no rule matched count={count}, r={r}, tau={tau}")


def classify_three(count: float, r: float, tau: float, th: PhaseThresholds) -> ThreePhase:
    """Simplified variant: SPC outbreak cut, then endemic/dormant split."""
    if r >= th.spc_epidemic or tau > th.rapid_cut:
        return ThreePhase.ACTIVE_OUTBREAK
    if r >= th.theta_low:
        return ThreePhase.ENDEMIC_UNMITIGATED
    return ThreePhase.DORMANT_BASELINE


def calibrate_thresholds(reference_z: np.ndarray) -> tuple[float, float]:
    """Data-driven thresholds from a dormant reference window.

    theta_low is the upper one-sigma bound of the reference distribution
    (mu_d + sigma_d), theta_high the two-sigma bound.
    """
    z = np.asarray(reference_z, dtype=float)
    if z.size < 6:
        raise WindowTooShort(f"reference window has {z.size} months; need >= 6")
    mu = float(np.mean(z))
    sd = float(np.std(z))
    return mu + sd, mu + 2.0 * sd


def rapid_cut(segment_slopes: list[float] | np.ndarray) -> float:
    """max(P75 of segment slopes, 0.05); the floor applies to empty input too.

    P75 uses linear interpolation (numpy default).
    """
    slopes = np.asarray(segment_slopes, dtype=float)
    if slopes.size == 0:
        return RAPID_FLOOR
    return max(float(np.percentile(slopes, 75)), RAPID_FLOOR)


@dataclass(frozen=True)
class PhaseTimeline:
    months: tuple[MonthIndex, ...]
    six_phase: tuple[SixPhase, ...]
    three_phase: tuple[ThreePhase, ...]
    thresholds: PhaseThresholds
    distribution_six: dict[str, tuple[int, float]] = field(default_factory=dict)
    distribution_three: dict[str, tuple[int, float]] = field(default_factory=dict)
    transitions_six: np.ndarray | None = None
    transitions_three: np.ndarray | None = None

    def current(self) -> tuple[SixPhase, ThreePhase]:
        return self.six_phase[-1], self.three_phase[-1]


def _distribution(labels, order) -> dict[str, tuple[int, float]]:
    n = len(labels)
    return {ph.value: (sum(1 for x in labels if x == ph),
                       100.0 * sum(1 for x in labels if x == ph) / n)
            for ph in order}


def transition_matrix(labels, order) -> np.ndarray:
    """Empirical P(next | current) over adjacent-month pairs.

    Rows for phases never departed from are left at zero.
    """
    index = {ph: i for i, ph in enumerate(order)}
    counts = np.zeros((len(order), len(order)))
    for a, b in zip(labels[:-1], labels[1:]):
        counts[index[a], index[b]] += 1
    out = np.zeros_like(counts)
    rows = counts.sum(axis=1)
    nonzero = rows > 0
    out[nonzero] = counts[nonzero] / rows[nonzero, None]
    return out


def timeline(panel: MonthlyPanel, risk: RiskSeries, th: PhaseThresholds) -> PhaseTimeline:
    """Per-month labels under both frameworks, with distribution and
    empirical transition matrices."""
    counts = {m: float(c) for m, c in zip(panel.months, panel.raw_count)}
    six: list[SixPhase] = []
    three: list[ThreePhase] = []
    for i, m in enumerate(risk.months):
        c = counts.get(m, 0.0)
        six.append(classify_six(c, float(risk.z[i]), float(risk.slope[i]), th))
        three.append(classify_three(c, float(risk.z[i]), float(risk.slope[i]), th))
    return PhaseTimeline(
        months=tuple(risk.months), six_phase=tuple(six), three_phase=tuple(three),
        thresholds=th,
        distribution_six=_distribution(six, SIX_PHASE_ORDER),
        distribution_three=_distribution(three, THREE_PHASE_ORDER),
        transitions_six=transition_matrix(six, SIX_PHASE_ORDER),
        transitions_three=transition_matrix(three, THREE_PHASE_ORDER),
    )


@dataclass(frozen=True)
class SegmentClassification:
    framework: str
    segment_phases: tuple[str, ...]
    month_labels: tuple[str, ...]   # segment phase expanded to every month

    def distribution(self) -> dict[str, tuple[int, float]]:
        n = len(self.month_labels)
        uniq = sorted(set(self.month_labels))
        return {u: (self.month_labels.count(u),
                    100.0 * self.month_labels.count(u) / n) for u in uniq}


def classify_segments(segmentation: Segmentation, th: PhaseThresholds,
                      framework: str = "three") -> SegmentClassification:
    """Classify each segment by its mean risk and within-segment slope.

    The six-phase variant additionally reads segments averaging under 0.5
    incidents/month as No Evidenced Occurrence, which requires segment
    mean counts (attach them via `segment_stats` first).
    """
    phases: list[str] = []
    labels: list[str] = []
    for seg in segmentation.segments:
        if framework == "six":
            if seg.mean_count is None:
                raise ValueError("six-phase segment rules need mean counts; "
                                 "run segment_stats with counts first")
            if seg.mean_count < SEGMENT_ZERO_RULE:
                phase = SixPhase.NO_EVIDENCED_OCCURRENCE.value
            else:
                phase = classify_six(seg.mean_count, seg.mean, seg.within_slope, th).value
        elif framework == "three":
            phase = classify_three(1.0, seg.mean, seg.within_slope, th).value
        else:
            raise ValueError(f"unknown framework {framework!r}")
        phases.append(phase)
        labels.extend([phase] * seg.n_months)
    return SegmentClassification(framework=framework,
                                 segment_phases=tuple(phases),
                                 month_labels=tuple(labels))
