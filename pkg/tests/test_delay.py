import datetime as dt

import numpy as np
import pytest

from phasekit.delay import (DAYS_PER_MONTH, NowcastAdjustment, apply_nowcast,
                            build_nowcast, compute_lags, fit_delay,
                            select_delay_model)
from phasekit.errors import InsufficientData
from phasekit.ingest import IncidentRecord
from phasekit.months import MonthIndex

from conftest import make_panel


def record(inc, reps):
    return IncidentRecord(incident_id="x", incident_date=dt.date.fromisoformat(inc),
                          report_dates=[dt.date.fromisoformat(r) for r in reps])


class TestComputeLags:
    def test_simple_lag(self):
        lags = compute_lags([record("2020-01-10", ["2020-01-12"])])
        assert lags.lag_days.tolist() == [2.0]
        assert lags.excluded == 0

    def test_negative_lag_excluded(self):
        lags = compute_lags([record("2020-01-10", ["2020-01-05", "2020-01-12"])])
        assert lags.lag_days.tolist() == [2.0]
        assert lags.excluded == 1

    def test_five_year_cap(self):
        lags = compute_lags([record("2015-01-01", ["2021-06-01"])])
        assert lags.lag_days.size == 0
        assert lags.excluded == 1


class TestFitDelay:
    def test_lognormal_recovery(self, rng):
        sample = rng.lognormal(mean=3.0, sigma=1.0, size=10000)
        model = fit_delay(sample, "lognormal")
        assert 2.97 <= model.params["mu"] <= 3.03
        assert 0.97 <= model.params["sigma"] <= 1.03

    def test_point_mass_flags_degenerate(self):
        model = fit_delay(np.full(50, np.e**2), "lognormal")
        assert model.params["mu"] == pytest.approx(2.0, abs=1e-9)
        assert model.degenerate

    def test_exponential_mle(self, rng):
        sample = rng.exponential(scale=10.0, size=5000)
        model = fit_delay(sample, "exponential")
        assert model.params["rate"] == pytest.approx(1.0 / sample.mean(), rel=1e-12)

    def test_weibull_recovery(self, rng):
        shape, scale = 1.5, 20.0
        sample = scale * rng.weibull(shape, size=8000)
        model = fit_delay(sample, "weibull")
        assert model.params["shape"] == pytest.approx(shape, rel=0.05)
        assert model.params["scale"] == pytest.approx(scale, rel=0.05)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            fit_delay(np.arange(1.0, 9.0), "lognormal")

    def test_minimum_n_flagged(self, rng):
        model = fit_delay(rng.lognormal(2, 1, size=10), "lognormal")
        assert model.degenerate

    def test_zero_lags_shifted(self):
        model = fit_delay(np.array([0.0] * 20 + [3.0] * 20), "lognormal")
        assert model.shifted_zeros == 20

    def test_lognormal_score_zero_at_mle(self, rng):
        sample = rng.lognormal(2.5, 0.8, size=2000)
        model = fit_delay(sample, "lognormal")
        mu, sigma = model.params["mu"], model.params["sigma"]

        def loglik(m, s):
            logs = np.log(sample)
            return (-np.sum(np.log(sample)) - sample.size * np.log(s * np.sqrt(2 * np.pi))
                    - np.sum((logs - m) ** 2) / (2 * s * s))

        eps = 1e-6
        d_mu = (loglik(mu + eps, sigma) - loglik(mu - eps, sigma)) / (2 * eps)
        d_sigma = (loglik(mu, sigma + eps) - loglik(mu, sigma - eps)) / (2 * eps)
        bound = 1e-4 * abs(model.loglik)
        assert abs(d_mu) < bound and abs(d_sigma) < bound


class TestSelectDelayModel:
    def test_exponential_sample_selects_exponential(self, rng):
        sample = rng.exponential(scale=10.0, size=5000)
        best, table = select_delay_model(sample)
        assert best.family in ("exponential", "weibull")
        # exponential must beat lognormal decisively on its own data
        assert table["exponential"].aic < table["lognormal"].aic

    def test_lognormal_sample_selects_lognormal(self, rng):
        sample = rng.lognormal(3.0, 1.0, size=5000)
        best, table = select_delay_model(sample)
        assert best.family == "lognormal"
        assert all(best.aic <= m.aic + 1e-9 for m in table.values())


class TestNowcast:
    def test_cdf_matches_counting_oracle(self, rng):
        lag_days = rng.geometric(p=0.04, size=4000).astype(float)
        adj = build_nowcast(lag_days)
        lag_months = np.floor(lag_days / DAYS_PER_MONTH)
        for h in range(adj.window_months + 1):
            assert adj.cdf[h] == pytest.approx(np.mean(lag_months <= h), abs=1e-12)

    def test_all_zero_lags(self):
        adj = build_nowcast(np.zeros(100))
        assert adj.window_months == 0
        assert adj.cdf[0] == 1.0
        assert adj.inflation_factor(0) == 1.0

    def test_df_style_window(self, rng):
        # median ~one-day lags with a thin long tail: small window, high F
        lag_days = np.concatenate([rng.uniform(0, 3, 950),
                                   rng.uniform(60, 150, 50)])
        adj = build_nowcast(lag_days)
        assert adj.window_months <= 5
        assert adj.cdf[-1] >= 0.95

    def test_factors_bounded(self):
        adj = NowcastAdjustment(window_months=2, cdf=np.array([0.1, 0.5, 1.0]), cap=5.0)
        assert adj.inflation_factor(0) == 5.0   # 1/0.1 capped
        assert adj.inflation_factor(1) == 2.0
        assert adj.inflation_factor(2) == 1.0
        assert adj.inflation_factor(3) == 1.0   # outside window

    def test_apply_nowcast_cap_binding(self):
        panel = make_panel([4, 6, 10])
        adj = NowcastAdjustment(window_months=0, cdf=np.array([0.2]), cap=5.0)
        out = apply_nowcast(panel, adj, as_of=panel.months[-1])
        assert out.nowcast_count[-1] == pytest.approx(50.0)
        np.testing.assert_array_equal(out.nowcast_count[:-1], [4.0, 6.0])

    def test_window_boundary_untouched(self):
        panel = make_panel([3, 3, 3, 3])
        adj = NowcastAdjustment(window_months=1, cdf=np.array([0.5, 0.8]), cap=5.0)
        out = apply_nowcast(panel, adj, as_of=panel.months[-1])
        assert out.nowcast_count[0] == 3.0       # horizon 3 > window
        assert out.nowcast_count[1] == 3.0       # horizon 2 > window
        assert out.nowcast_count[2] == pytest.approx(3 / 0.8)
        assert out.nowcast_count[3] == pytest.approx(3 / 0.5)

    def test_monotone_in_raw_count(self):
        adj = NowcastAdjustment(window_months=1, cdf=np.array([0.4, 0.9]), cap=5.0)
        low = apply_nowcast(make_panel([1, 2]), adj, MonthIndex(2020, 2))
        high = apply_nowcast(make_panel([1, 5]), adj, MonthIndex(2020, 2))
        assert np.all(high.nowcast_count >= low.nowcast_count)
