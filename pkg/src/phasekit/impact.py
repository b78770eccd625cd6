"""Before/after intervention tests with false-discovery-rate control.

Each event compares mean standardized risk in the window before the
event month against the window starting at it (Welch two-sample t-test;
no equal-variance assumption). Directions are assigned only after FDR
adjustment across the whole event family, so a single event's label can
change when tested alongside others. Wave-level analysis anchors at the
earliest event of each wave with a longer window.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Iterable, Literal, TextIO

import numpy as np
from scipy import stats as sps

from .core import RiskSeries
from .errors import InsufficientWindow, SchemaMismatch
from .months import MonthIndex

SIGNIFICANCE = 0.05


@dataclass(frozen=True)
class InterventionEvent:
    name: str
    month: MonthIndex
    type: str = "regulatory"
    expected_effect: Literal["mitigation", "shock"] = "mitigation"
    window_months: int = 3
    wave: str | None = None

    def __post_init__(self):
        if self.window_months < 1:
            raise ValueError("window must be >= 1 month")


@dataclass(frozen=True)
class ImpactResult:
    event: InterventionEvent
    pre_mean: float
    post_mean: float
    delta: float
    t_stat: float
    p_raw: float
    p_fdr: float
    direction: Literal["mitigation", "deterioration", "none"]
    truncated: bool = False


def load_interventions(stream: TextIO) -> list[InterventionEvent]:
    reader = csv.DictReader(stream)
    header = reader.fieldnames or []
    required = ("name", "month", "type", "expected_effect")
    if any(c not in header for c in required):
        raise SchemaMismatch(f"expected columns {required}, got {header}")
    events = []
    for row in reader:
        events.append(InterventionEvent(
            name=row["name"], month=MonthIndex.parse(row["month"]),
            type=row["type"], expected_effect=row["expected_effect"],
            wave=(row.get("wave") or "").strip() or None))
    return events


def welch_t(pre: np.ndarray, post: np.ndarray) -> tuple[float, float]:
    """Welch statistic and two-sided p (Welch-Satterthwaite df)."""
    n1, n2 = pre.size, post.size
    v1 = float(np.var(pre, ddof=1))
    v2 = float(np.var(post, ddof=1))
    se2 = v1 / n1 + v2 / n2
    if se2 == 0:
        return 0.0, 1.0
    t = float((np.mean(post) - np.mean(pre)) / np.sqrt(se2))
    df = se2**2 / ((v1 / n1) ** 2 / (n1 - 1) + (v2 / n2) ** 2 / (n2 - 1))
    return t, float(2 * sps.t.sf(abs(t), df))


def _windows(risk: RiskSeries, anchor: MonthIndex,
             window: int) -> tuple[np.ndarray, np.ndarray, bool]:
    start = risk.months[0]
    pos = anchor - start
    pre_lo, pre_hi = max(pos - window, 0), pos
    post_lo, post_hi = pos, min(pos + window, len(risk.months))
    pre = risk.z[pre_lo:pre_hi]
    post = risk.z[post_lo:post_hi]
    truncated = (pre.size < window) or (post.size < window)
    if pre.size < 2 or post.size < 2:
        raise InsufficientWindow(
            f"event at {anchor} leaves {pre.size} pre / {post.size} post months")
    return pre, post, truncated


def event_impact(risk: RiskSeries, event: InterventionEvent,
                 window: int | None = None) -> ImpactResult:
    """Single-event test; for a family of one the FDR p equals the raw p."""
    w = window or event.window_months
    pre, post, truncated = _windows(risk, event.month, w)
    t, p = welch_t(pre, post)
    delta = float(np.mean(post) - np.mean(pre))
    return ImpactResult(
        event=event, pre_mean=float(np.mean(pre)), post_mean=float(np.mean(post)),
        delta=delta, t_stat=t, p_raw=p, p_fdr=p,
        direction=_direction(delta, p), truncated=truncated)


def _direction(delta: float, p_fdr: float) -> Literal["mitigation", "deterioration", "none"]:
    if p_fdr < SIGNIFICANCE:
        return "mitigation" if delta < 0 else "deterioration"
    return "none"


def fdr_adjust(p_values: list[float] | np.ndarray,
               method: Literal["bh", "by"] = "bh") -> np.ndarray:
    """Step-up adjusted p-values, monotone-enforced and clipped to 1.

    "by" multiplies by the harmonic-sum factor for arbitrary dependence.
    """
    p = np.asarray(p_values, dtype=float)
    m = p.size
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    ranked = p[order]
    factor = float(np.sum(1.0 / np.arange(1, m + 1))) if method == "by" else 1.0
    adjusted = ranked * m * factor / np.arange(1, m + 1)
    # enforce monotonicity from the largest p downward
    adjusted = np.minimum.accumulate(adjusted[::-1])[::-1]
    adjusted = np.clip(adjusted, 0.0, 1.0)
    out = np.empty(m)
    out[order] = adjusted
    return out


def analyze_events(risk: RiskSeries, events: Iterable[InterventionEvent],
                   window: int | None = None,
                   method: Literal["bh", "by"] = "bh") -> list[ImpactResult]:
    """Run the whole event family, then adjust and assign directions."""
    raw = [event_impact(risk, ev, window) for ev in events]
    adjusted = fdr_adjust([r.p_raw for r in raw], method)
    return [replace(r, p_fdr=float(q), direction=_direction(r.delta, float(q)))
            for r, q in zip(raw, adjusted)]


EXPECTED_ROWS = ("mitigation", "shock")
ACTUAL_COLS = ("mitigation", "neutral", "shock")


def expected_vs_actual(results: Iterable[ImpactResult]) -> dict[str, dict[str, int]]:
    """2x3 confusion of expected effect against FDR-adjusted outcome."""
    table = {row: {col: 0 for col in ACTUAL_COLS} for row in EXPECTED_ROWS}
    for r in results:
        actual = {"mitigation": "mitigation", "none": "neutral",
                  "deterioration": "shock"}[r.direction]
        table[r.event.expected_effect][actual] += 1
    return table


def wave_impact(risk: RiskSeries, events: Iterable[InterventionEvent],
                window: int = 6,
                method: Literal["bh", "by"] = "bh") -> list[ImpactResult]:
    """Aggregate events into waves anchored at each wave's earliest month."""
    waves: dict[str, list[InterventionEvent]] = {}
    for ev in events:
        if ev.wave is None:
            continue
        waves.setdefault(ev.wave, []).append(ev)
    anchors = []
    for name in sorted(waves):
        members = waves[name]
        first = min(members, key=lambda e: (e.month.year, e.month.month))
        anchors.append(InterventionEvent(
            name=name, month=first.month, type="wave",
            expected_effect=first.expected_effect,
            window_months=window, wave=name))
    return analyze_events(risk, anchors, window, method)
