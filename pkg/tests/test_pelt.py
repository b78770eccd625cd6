import numpy as np
import pytest

from phasekit.errors import EmptySweep, SeriesTooShort
from phasekit.pelt import (PenaltySweep, PlateauRow, pelt_detect, penalty_formula,
                           penalty_sweep, segment_stats, select_by_plateau)


def exhaustive_dp(x, penalty, min_segment=2):
    """O(n^2) dynamic program over all admissible segmentations."""
    n = x.size
    cs = np.concatenate([[0.0], np.cumsum(x)])
    cs2 = np.concatenate([[0.0], np.cumsum(x * x)])

    def cost(s, t):
        m = t - s
        tot = cs[t] - cs[s]
        return cs2[t] - cs2[s] - tot * tot / m

    inf = float("inf")
    F = np.full(n + 1, inf)
    F[0] = -penalty
    for t in range(min_segment, n + 1):
        for s in range(0, t - min_segment + 1):
            if F[s] < inf and (s == 0 or s >= min_segment):
                cand = F[s] + cost(s, t) + penalty
                if cand < F[t]:
                    F[t] = cand
    return F[n]


class TestPeltDetect:
    def test_constant_series_single_segment(self):
        seg = pelt_detect(np.full(30, 2.5), penalty=1.0)
        assert seg.n_segments == 1
        assert seg.changepoints == ()

    def test_noise_free_step(self):
        x = np.concatenate([np.zeros(50), np.full(50, 5.0)])
        seg = pelt_detect(x, penalty=2.0)
        assert seg.changepoints == (50,)
        assert seg.total_cost == pytest.approx(2.0)  # zero within-cost + 1 cpt

    def test_matches_exhaustive_dp(self, rng):
        for trial in range(60):
            n = int(rng.integers(8, 61))
            x = rng.normal(size=n)
            if trial % 2:
                k = int(rng.integers(2, n - 2))
                x[k:] += rng.uniform(1, 6)
            rho = float(rng.uniform(0.2, 8.0))
            seg = pelt_detect(x, rho)
            # F[n] is sum of segment costs + rho per changepoint, same as total_cost
            assert seg.total_cost == pytest.approx(exhaustive_dp(x, rho), abs=1e-8)

    def test_cost_beats_random_segmentations(self, rng):
        x = rng.normal(size=80)
        x[30:] += 2.0
        rho = 3.0
        seg = pelt_detect(x, rho)
        for _ in range(500):
            k = int(rng.integers(0, 4))
            cuts = np.sort(rng.choice(np.arange(2, 79), size=k, replace=False))
            cuts = [int(c) for c in cuts]
            bounds = [0, *cuts, 80]
            if any(b - a < 2 for a, b in zip(bounds[:-1], bounds[1:])):
                continue
            cost = sum(float(np.sum((x[a:b] - x[a:b].mean()) ** 2))
                       for a, b in zip(bounds[:-1], bounds[1:]))
            cost += rho * len(cuts)
            assert seg.total_cost <= cost + 1e-9

    def test_too_short(self):
        with pytest.raises(SeriesTooShort):
            pelt_detect(np.array([1.0, 2.0, 3.0]), 1.0)

    def test_min_segment_respected(self, rng):
        x = rng.normal(size=40)
        x[3:] += 5
        seg = pelt_detect(x, 0.5, min_segment=4)
        assert all(s.n_months >= 4 for s in seg.segments)

    def test_translation_invariance(self, rng):
        x = rng.normal(size=60)
        x[25:] += 3
        a = pelt_detect(x, 2.0)
        b = pelt_detect(x + 17.3, 2.0)
        assert a.changepoints == b.changepoints

    def test_scaling_covariance(self, rng):
        x = rng.normal(size=60)
        x[25:] += 3
        c = 2.5
        a = pelt_detect(x, 2.0)
        b = pelt_detect(c * x, 2.0 * c * c)
        assert a.changepoints == b.changepoints
        assert b.total_cost == pytest.approx(c * c * a.total_cost, rel=1e-9)

    def test_monotone_in_penalty(self, rng):
        x = rng.normal(size=70)
        x[20:] += 2
        x[50:] -= 3
        counts = [pelt_detect(x, rho).n_segments for rho in (0.5, 1, 2, 4, 8, 16)]
        assert counts == sorted(counts, reverse=True)


class TestPenaltyFormula:
    def test_exploratory_reference_value(self):
        assert penalty_formula("exploratory", 128, 1.0) == pytest.approx(2.43, abs=0.01)

    def test_conservative_is_six_times_exploratory(self):
        lo = penalty_formula("exploratory", 128, 1.0)
        hi = penalty_formula("conservative", 128, 1.0)
        assert hi == pytest.approx(6 * lo, rel=1e-12)

    def test_linear_in_variance(self):
        assert penalty_formula("moderate", 100, 2.0) == pytest.approx(
            2 * penalty_formula("moderate", 100, 1.0), rel=1e-12)

    def test_unknown_level(self):
        with pytest.raises(ValueError):
            penalty_formula("maximal", 100, 1.0)


class TestPenaltySweep:
    def test_constant_series_single_plateau(self):
        sweep = penalty_sweep(np.full(20, 1.0), [0.5, 1.0, 2.0, 4.0])
        assert len(sweep.plateaus) == 1
        assert sweep.plateaus[0].n_segments == 1
        assert sweep.plateaus[0].appearances == 4

    def test_counts_non_increasing(self, rng):
        x = rng.normal(size=80)
        x[30:] += 2.5
        x[60:] -= 2.0
        sweep = penalty_sweep(x, [0.5 * k for k in range(1, 21)])
        counts = list(sweep.segment_counts)
        assert counts == sorted(counts, reverse=True)

    def test_two_step_signal_stable_plateau(self, rng):
        x = rng.normal(0, 0.4, size=90)
        x[30:] += 3.0
        x[60:] += 3.0
        sweep = penalty_sweep(x, [0.5 * k for k in range(1, 21)])
        widest = max(sweep.plateaus, key=lambda p: p.appearances)
        assert widest.n_segments == 3

    def test_unsorted_grid_rejected(self):
        with pytest.raises(ValueError):
            penalty_sweep(np.zeros(10), [2.0, 1.0])


class TestSelectByPlateau:
    def test_widest_wins(self):
        sweep = PenaltySweep(grid=(), segment_counts=(), plateaus=(
            PlateauRow(5, 4, 1.0, 2.5), PlateauRow(3, 10, 3.0, 7.5)))
        assert select_by_plateau(sweep) == pytest.approx(5.25)

    def test_single_entry(self):
        sweep = PenaltySweep(grid=(), segment_counts=(), plateaus=(
            PlateauRow(2, 3, 4.0, 6.0),))
        assert select_by_plateau(sweep) == pytest.approx(5.0)

    def test_tie_breaks_toward_fewer_segments(self):
        sweep = PenaltySweep(grid=(), segment_counts=(), plateaus=(
            PlateauRow(5, 6, 0.5, 3.0), PlateauRow(2, 6, 3.5, 6.0)))
        assert select_by_plateau(sweep) == pytest.approx(4.75)

    def test_empty(self):
        with pytest.raises(EmptySweep):
            select_by_plateau(PenaltySweep(grid=(), segment_counts=(), plateaus=()))


class TestSegmentStats:
    def test_small_example(self):
        x = np.array([1.0, 2.0, 3.0, 10.0, 10.0])
        seg = pelt_detect(x, 1.0)
        enriched = segment_stats(x, seg, counts=np.array([1, 2, 3, 4, 5]))
        first = enriched.segments[0]
        assert first.mean == pytest.approx(2.0)
        assert first.within_slope == pytest.approx(1.0)
        assert first.mean_count == pytest.approx(2.0)

    def test_matches_direct_oracle(self, rng):
        x = rng.normal(size=50)
        x[20:] += 4
        counts = rng.poisson(3, size=50)
        seg = segment_stats(x, pelt_detect(x, 2.0), counts)
        for s in seg.segments:
            vals = x[s.start:s.end]
            assert s.mean == pytest.approx(vals.mean(), abs=1e-9)
            t = np.arange(vals.size, dtype=float)
            A = np.column_stack([np.ones_like(t), t])
            coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
            assert s.within_slope == pytest.approx(coef[1], abs=1e-9)
            assert s.mean_count == pytest.approx(counts[s.start:s.end].mean(), abs=1e-9)

    def test_min_segment_two_keeps_slopes_defined(self, rng):
        x = rng.normal(size=30)
        seg = pelt_detect(x, 0.3)
        assert all(s.n_months >= 2 for s in seg.segments)
        assert all(np.isfinite(s.within_slope) for s in seg.segments)
