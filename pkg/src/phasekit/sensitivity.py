"""Parameter sweeps and invariant-zone detection.

Threshold sweeps reuse the already-computed risk series and segmentation
(classification is cheap); exposure half-life and dispersion sweeps
re-run the dependent subgraph (exposure -> GLM -> excess risk -> PELT)
because those parameters sit upstream of the signal itself.

Invariant zones are reported as open intervals whose endpoints are the
actual flipping values (segment mean risks), not grid points.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Sequence

from .core import MonthlyPanel, RiskSeries
from .errors import ZeroVariance
from .exposure import StarEvent, attach_index, depreciated_installed_base, scale_range
from .glm import CountFormula, excess_risk, fit_count_model
from .months import MonthIndex
from .pelt import Segmentation, pelt_detect, segment_stats
from .phases import (PhaseThresholds, SixPhase, ThreePhase, classify_segments,
                     classify_six)


@dataclass(frozen=True)
class SweepResult:
    axis: str
    grid: tuple[Any, ...]
    outcomes: tuple[dict[str, Any], ...]
    invariant_zones: tuple[tuple[float, float], ...] = ()
    flat_axes: tuple[str, ...] = ()


def _with_theta_low(base: PhaseThresholds, theta_low: float) -> PhaseThresholds:
    gap = base.theta_high - base.theta_low
    return replace(base, theta_low=theta_low, theta_high=theta_low + gap)


def threshold_sweep(segmentation: Segmentation, base: PhaseThresholds,
                    grid: Sequence[float], framework: str = "three") -> SweepResult:
    """Reclassify segments across a theta_low grid.

    Outcomes carry the per-segment phases and the dormant/endemic month
    split. Invariant zones are the open intervals between consecutive
    flipping values (distinct segment mean risks inside the grid hull).
    """
    grid = tuple(float(g) for g in grid)
    outcomes = []
    for theta in grid:
        th = _with_theta_low(base, theta)
        cls = classify_segments(segmentation, th, framework)
        dist = cls.distribution()
        n = len(cls.month_labels)
        if framework == "three":
            dormant = dist.get(ThreePhase.DORMANT_BASELINE.value, (0, 0.0))[1]
            endemic = 100.0 - dormant
        else:
            dormant = sum(pct for name, (_, pct) in dist.items()
                          if name in (SixPhase.NO_EVIDENCED_OCCURRENCE.value,
                                      SixPhase.RARE_MITIGATED.value,
                                      SixPhase.RARE_OCCURRENCE.value))
            endemic = 100.0 - dormant
        outcomes.append({
            "theta_low": theta,
            "segment_phases": cls.segment_phases,
            "dormant_pct": dormant,
            "endemic_pct": endemic,
            "n_months": n,
        })

    lo, hi = min(grid), max(grid)
    flips = sorted({s.mean for s in segmentation.segments if lo < s.mean < hi})
    edges = [lo, *flips, hi]
    zones = tuple((a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a)
    return SweepResult(axis="theta_low", grid=grid, outcomes=tuple(outcomes),
                       invariant_zones=zones)


def two_threshold_sweep(panel: MonthlyPanel, risk: RiskSeries,
                        base: PhaseThresholds,
                        grid_low: Sequence[float],
                        grid_high: Sequence[float]) -> SweepResult:
    """Month-level six-phase sweep over the (theta_low, theta_high) grid.

    Each cell records the share of months labeled Endemic Unmitigated;
    axes whose variation never changes any cell are reported flat.
    """
    counts = {m: float(c) for m, c in zip(panel.months, panel.raw_count)}
    if max(grid_low) >= min(grid_high):
        raise ValueError("grid_low values must stay below grid_high values")

    def pct_endemic(tl: float, th_: float) -> float:
        th = replace(base, theta_low=tl, theta_high=th_)
        labels = [classify_six(counts.get(m, 0.0), float(z), float(s), th)
                  for m, z, s in zip(risk.months, risk.z, risk.slope)]
        return 100.0 * sum(1 for x in labels if x == SixPhase.ENDEMIC_UNMITIGATED) / len(labels)

    cells = {}
    for tl in grid_low:
        for th_ in grid_high:
            cells[(float(tl), float(th_))] = pct_endemic(tl, th_)

    low_flat = all(
        len({round(cells[(float(tl), float(th_))], 12) for tl in grid_low}) == 1
        for th_ in grid_high)
    high_flat = all(
        len({round(cells[(float(tl), float(th_))], 12) for th_ in grid_high}) == 1
        for tl in grid_low)
    flat = tuple(name for name, ok in
                 (("theta_low", low_flat), ("theta_high", high_flat)) if ok)
    outcomes = tuple({"theta_low": tl, "theta_high": th_, "endemic_unmitigated_pct": v}
                     for (tl, th_), v in sorted(cells.items()))
    return SweepResult(axis="theta_low x theta_high",
                       grid=tuple(sorted(cells)), outcomes=outcomes,
                       flat_axes=flat)


def _excess_pelt(panel: MonthlyPanel, formula: CountFormula, family: str,
                 alpha: float | None, penalty: float) -> tuple[RiskSeries, Segmentation]:
    fit = fit_count_model(panel, formula, family=family, alpha=alpha, offset=True)
    signal = excess_risk(panel, fit)
    if signal.degenerate or signal.standardized is None:
        raise ZeroVariance("excess risk signal is degenerate under this setting")
    risk = signal.standardized
    seg = pelt_detect(risk.z, penalty)
    counts = panel.raw_count[fit.row_mask]
    return risk, segment_stats(risk.z, seg, counts)


def main_break(seg: Segmentation) -> int | None:
    """Changepoint with the largest upward jump in segment means."""
    best, jump = None, 0.0
    for left, right in zip(seg.segments[:-1], seg.segments[1:]):
        delta = right.mean - left.mean
        if delta > jump:
            best, jump = right.start, delta
    return best


def _break_outcome(months: tuple[MonthIndex, ...], seg: Segmentation) -> dict[str, Any]:
    pos = main_break(seg)
    out: dict[str, Any] = {"n_segments": seg.n_segments, "break_position": pos}
    if pos is not None:
        out["break_month"] = str(months[pos])
        before = [s for s in seg.segments if s.end <= pos]
        after = next(s for s in seg.segments if s.start == pos)
        n_before = sum(s.n_months for s in before)
        out["pre_break_mean"] = (sum(s.mean * s.n_months for s in before) / n_before
                                 if n_before else float("nan"))
        out["post_break_mean"] = after.mean
    return out


def halflife_sweep(events: list[StarEvent], panel: MonthlyPanel,
                   halflives: Sequence[float], formula: CountFormula,
                   alpha: float, penalty: float,
                   scale_to: tuple[float, float] = (10.0, 100.0)) -> SweepResult:
    """Re-run exposure -> GLM -> excess risk -> PELT per exposure half-life."""
    outcomes = []
    for hl in halflives:
        index = depreciated_installed_base(events, hl, panel.months[0], panel.months[-1])
        index = scale_range(index, *scale_to)
        p = attach_index(panel, index)
        risk, seg = _excess_pelt(p, formula, "negbin", alpha, penalty)
        outcomes.append({"half_life_months": float(hl), **_break_outcome(risk.months, seg)})
    return SweepResult(axis="exposure_half_life", grid=tuple(float(h) for h in halflives),
                       outcomes=tuple(outcomes))


def dispersion_sweep(panel: MonthlyPanel, alphas: Sequence[float],
                     formula: CountFormula, penalty: float) -> SweepResult:
    """Re-run GLM -> excess risk -> PELT per NB dispersion value."""
    outcomes = []
    for a in alphas:
        risk, seg = _excess_pelt(panel, formula, "negbin", float(a), penalty)
        outcomes.append({"alpha": float(a), **_break_outcome(risk.months, seg)})
    return SweepResult(axis="nb_dispersion", grid=tuple(float(a) for a in alphas),
                       outcomes=tuple(outcomes))
