"""Optimal multiple-changepoint detection under a penalized L2 cost.

The detector minimizes sum-of-squares about segment means plus a per-
changepoint penalty, using pruned exact dynamic programming (the pruning
inequality is exact for L2, so results match exhaustive DP). Penalty
choice is supported three ways: closed-form levels (multiplier · ln n ·
variance), a penalty sweep, and plateau-stability selection over the
sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptySweep, SeriesTooShort

PENALTY_MULTIPLIERS = {
    "conservative": 3.0,
    "moderate": 2.0,
    "sensitive": 1.0,
    "exploratory": 0.5,
}

DEFAULT_MIN_SEGMENT = 2  # within-segment slopes need two points


@dataclass(frozen=True)
class SegmentStat:
    start: int            # inclusive position
    end: int              # exclusive position
    n_months: int
    mean: float
    within_slope: float
    mean_count: float | None = None


@dataclass(frozen=True)
class Segmentation:
    penalty: float
    changepoints: tuple[int, ...]   # start positions of segments 2..k
    segments: tuple[SegmentStat, ...]
    total_cost: float

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def labels(self, n: int) -> np.ndarray:
        """Per-position segment index 0..k−1."""
        out = np.zeros(n, dtype=int)
        for i, seg in enumerate(self.segments):
            out[seg.start:seg.end] = i
        return out


@dataclass(frozen=True)
class PlateauRow:
    n_segments: int
    appearances: int
    rho_lo: float
    rho_hi: float


@dataclass(frozen=True)
class PenaltySweep:
    grid: tuple[float, ...]
    segment_counts: tuple[int, ...]
    plateaus: tuple[PlateauRow, ...]


def _ols_slope(seg: np.ndarray) -> float:
    idx = np.arange(seg.size, dtype=float)
    idx -= idx.mean()
    return float(idx @ (seg - seg.mean()) / (idx @ idx))


def _segment_cost(cs: np.ndarray, cs2: np.ndarray, s: int, t: int) -> float:
    """L2 cost of x[s:t] about its mean, from prefix sums."""
    n = t - s
    total = cs[t] - cs[s]
    return float(cs2[t] - cs2[s] - total * total / n)


def pelt_detect(signal: np.ndarray, penalty: float,
                min_segment: int = DEFAULT_MIN_SEGMENT) -> Segmentation:
    """Globally optimal penalized L2 segmentation via PELT.

    total_cost = sum of segment costs + penalty · (number of changepoints);
    identical to exhaustive dynamic programming for any input.
    """
    x = np.asarray(signal, dtype=float)
    n = x.size
    if penalty <= 0:
        raise ValueError("penalty must be positive")
    if n < 2 * min_segment:
        raise SeriesTooShort(f"need >= {2 * min_segment} points, got {n}")

    cs = np.concatenate([[0.0], np.cumsum(x)])
    cs2 = np.concatenate([[0.0], np.cumsum(x * x)])

    inf = float("inf")
    F = np.full(n + 1, inf)
    F[0] = -penalty
    prev = np.zeros(n + 1, dtype=int)
    candidates = [0]
    # With a minimum segment length L > 1, a candidate dominated at time t
    # may still be required at t' in (t, t+L) where the dominating cut at t
    # is not yet admissible; removals are therefore deferred by L steps.
    removal_at: dict[int, int] = {}
    for t in range(min_segment, n + 1):
        candidates = [s for s in candidates if removal_at.get(s, inf) > t]
        eligible = [s for s in candidates if t - s >= min_segment]
        if not eligible:
            continue
        costs = [F[s] + _segment_cost(cs, cs2, s, t) + penalty for s in eligible]
        best = int(np.argmin(costs))
        F[t] = costs[best]
        prev[t] = eligible[best]
        # prune (L2 satisfies the inequality with K = 0), deferred by L
        for s in eligible:
            if s not in removal_at and \
                    F[s] + _segment_cost(cs, cs2, s, t) > F[t]:
                removal_at[s] = t + min_segment
        candidates.append(t)

    # recover segment boundaries
    bounds = []
    t = n
    while t > 0:
        bounds.append(t)
        t = prev[t]
    bounds.append(0)
    bounds.reverse()

    segments = tuple(
        SegmentStat(start=s, end=e, n_months=e - s,
                    mean=float(x[s:e].mean()), within_slope=_ols_slope(x[s:e]))
        for s, e in zip(bounds[:-1], bounds[1:])
    )
    changepoints = tuple(bounds[1:-1])
    total = sum(_segment_cost(cs, cs2, s.start, s.end) for s in segments)
    return Segmentation(penalty=penalty, changepoints=changepoints,
                        segments=segments,
                        total_cost=total + penalty * len(changepoints))


def penalty_formula(level: str, n: int, variance: float) -> float:
    """Calibrated penalty: multiplier · ln(n) · variance."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if variance <= 0:
        raise ValueError("variance must be positive")
    try:
        mult = PENALTY_MULTIPLIERS[level]
    except KeyError:
        raise ValueError(f"unknown penalty level {level!r}; "
                         f"choose from {sorted(PENALTY_MULTIPLIERS)}") from None
    return mult * np.log(n) * variance


def penalty_sweep(signal: np.ndarray, grid: list[float],
                  min_segment: int = DEFAULT_MIN_SEGMENT) -> PenaltySweep:
    """Segment counts across a sorted penalty grid, aggregated into plateaus."""
    if list(grid) != sorted(grid):
        raise ValueError("penalty grid must be sorted ascending")
    counts = [pelt_detect(signal, rho, min_segment).n_segments for rho in grid]
    plateaus: list[PlateauRow] = []
    i = 0
    while i < len(grid):
        j = i
        while j + 1 < len(grid) and counts[j + 1] == counts[i]:
            j += 1
        plateaus.append(PlateauRow(n_segments=counts[i], appearances=j - i + 1,
                                   rho_lo=float(grid[i]), rho_hi=float(grid[j])))
        i = j + 1
    return PenaltySweep(grid=tuple(float(g) for g in grid),
                        segment_counts=tuple(counts), plateaus=tuple(plateaus))


def select_by_plateau(sweep: PenaltySweep) -> float:
    """Midpoint of the widest plateau's penalty range.

    Width is measured in grid appearances; ties break toward the plateau
    with fewer segments (parsimony under equal stability).
    """
    if not sweep.plateaus:
        raise EmptySweep("sweep has no plateau rows")
    best = max(sweep.plateaus, key=lambda p: (p.appearances, -p.n_segments))
    return (best.rho_lo + best.rho_hi) / 2.0


def segment_stats(signal: np.ndarray, segmentation: Segmentation,
                  counts: np.ndarray | None = None) -> Segmentation:
    """Recompute per-segment mean/slope and attach mean raw counts."""
    x = np.asarray(signal, dtype=float)
    enriched = []
    for seg in segmentation.segments:
        vals = x[seg.start:seg.end]
        mean_count = (float(np.mean(counts[seg.start:seg.end]))
                      if counts is not None else None)
        enriched.append(replace(seg, mean=float(vals.mean()),
                                within_slope=_ols_slope(vals),
                                mean_count=mean_count))
    return replace(segmentation, segments=tuple(enriched))
