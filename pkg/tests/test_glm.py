import numpy as np
import pytest

from phasekit.errors import AllZeroResponse, SingularDesign
from phasekit.glm import (CountFormula, alpha_grid_search, dispersion_diagnostics,
                          excess_risk, fit_count_model,
                          likelihood_ratio_poisson_vs_nb)

from conftest import make_panel


def simulate_poisson_panel(rng, n=120, intercept=-1.0, slope=0.4, base=10.0):
    t = np.arange(n, dtype=float)
    tstd = (t - t.mean()) / t.std()
    expo = base * np.exp(0.01 * t)
    mu = expo * np.exp(intercept + slope * tstd)
    return make_panel(rng.poisson(mu), exposure=expo), intercept, slope


class TestFitCountModel:
    def test_intercept_only_closed_form(self):
        panel = make_panel([6] * 20, exposure=[2.0] * 20)
        fit = fit_count_model(panel, CountFormula(time_linear=False), offset=True)
        assert fit.coefficients["intercept"] == pytest.approx(np.log(3.0), abs=1e-10)

    def test_poisson_recovery_per_coefficient_coverage(self):
        # per-coefficient 2-SE coverage is ~95%; fixed seeds make this exact
        hits = 0
        for seed in range(30):
            panel, b0, b1 = simulate_poisson_panel(np.random.default_rng(seed))
            fit = fit_count_model(panel, CountFormula(), "poisson", offset=True)
            hits += abs(fit.coefficients["intercept"] - b0) <= 2 * fit.standard_errors["intercept"]
            hits += abs(fit.coefficients["time_linear"] - b1) <= 2 * fit.standard_errors["time_linear"]
        assert hits >= 55  # of 60 coefficient draws

    def test_rate_ratio_identity(self, rng):
        panel, _, _ = simulate_poisson_panel(rng)
        fit = fit_count_model(panel, CountFormula(), offset=True)
        for term in fit.terms:
            assert fit.rate_ratios[term] == pytest.approx(
                np.exp(fit.coefficients[term]), rel=1e-12)

    def test_score_gradient_near_zero(self, rng):
        panel, _, _ = simulate_poisson_panel(rng)
        for family, alpha in (("poisson", None), ("negbin", 0.8)):
            fit = fit_count_model(panel, CountFormula(), family, alpha, offset=True)
            grad = numeric_score(panel, fit)
            assert np.max(np.abs(grad)) < 1e-4 * (1.0 + abs(fit.loglik))

    def test_offset_shifts_intercept_only(self):
        y = [3, 5, 2, 4, 6, 3, 2, 5, 4, 3, 6, 2]
        base = fit_count_model(make_panel(y, exposure=[1.0] * 12),
                               CountFormula(time_linear=False), offset=True)
        doubled = fit_count_model(make_panel(y, exposure=[2.0] * 12),
                                  CountFormula(time_linear=False), offset=True)
        delta = doubled.coefficients["intercept"] - base.coefficients["intercept"]
        assert delta == pytest.approx(-np.log(2), abs=1e-6)

    def test_nb_approaches_poisson_at_tiny_alpha(self, rng):
        panel, _, _ = simulate_poisson_panel(rng)
        pois = fit_count_model(panel, CountFormula(), "poisson", offset=True)
        nb = fit_count_model(panel, CountFormula(), "negbin", 1e-6, offset=True)
        assert abs(nb.loglik - pois.loglik) < 1e-3

    def test_all_zero_response(self):
        with pytest.raises(AllZeroResponse):
            fit_count_model(make_panel([0] * 15), CountFormula(time_linear=False))

    def test_singular_design(self):
        panel = make_panel([1, 2, 3] * 5, media=[4.0] * 15)
        with pytest.raises(SingularDesign):
            fit_count_model(panel, CountFormula(time_linear=False, media=True))


def numeric_score(panel, fit):
    from phasekit.glm import _design, _loglik
    rows = fit.row_mask
    y = np.rint(panel.nowcast_count[rows])
    X, names, _ = _design(panel, CountFormula(
        time_linear="time_linear" in fit.terms,
        time_quadratic="time_quadratic" in fit.terms,
        media="media_std" in fit.terms), rows)
    offs = np.log(panel.exposure[rows]) if fit.design_meta.get("offset") else 0.0
    beta = np.array([fit.coefficients[t] for t in fit.terms])

    def ll(b):
        return _loglik(y, np.exp(X @ b + offs), fit.family, fit.alpha)

    eps = 1e-6
    grad = np.zeros(beta.size)
    for j in range(beta.size):
        up, down = beta.copy(), beta.copy()
        up[j] += eps
        down[j] -= eps
        grad[j] = (ll(up) - ll(down)) / (2 * eps)
    return grad


class TestAgainstStatsmodels:
    def test_poisson_offset_fit_matches(self, rng):
        sm = pytest.importorskip("statsmodels.api")
        panel, _, _ = simulate_poisson_panel(rng)
        fit = fit_count_model(panel, CountFormula(), "poisson", offset=True)
        n = panel.n_months
        t = np.arange(n, dtype=float)
        X = np.column_stack([np.ones(n), (t - t.mean()) / t.std()])
        ref = sm.GLM(np.rint(panel.nowcast_count), X,
                     family=sm.families.Poisson(),
                     offset=np.log(panel.exposure)).fit()
        np.testing.assert_allclose(
            [fit.coefficients["intercept"], fit.coefficients["time_linear"]],
            ref.params, atol=1e-8)
        np.testing.assert_allclose(
            [fit.standard_errors["intercept"], fit.standard_errors["time_linear"]],
            ref.bse, atol=1e-6)
        assert fit.loglik == pytest.approx(ref.llf, abs=1e-6)

    def test_negbin_fixed_alpha_matches(self, rng):
        sm = pytest.importorskip("statsmodels.api")
        alpha = 0.7
        r = 1.0 / alpha
        mu = 6.0
        y = rng.negative_binomial(r, r / (r + mu), size=200)
        y[0] = max(y[0], 1)
        panel = make_panel(y)
        fit = fit_count_model(panel, CountFormula(time_linear=False),
                              "negbin", alpha)
        X = np.ones((200, 1))
        ref = sm.GLM(y, X, family=sm.families.NegativeBinomial(alpha=alpha)).fit()
        assert fit.coefficients["intercept"] == pytest.approx(ref.params[0],
                                                              abs=1e-8)
        assert fit.loglik == pytest.approx(ref.llf, abs=1e-6)


class TestDispersion:
    def test_equidispersed_ratio_near_one(self):
        within = 0
        for seed in range(30):
            panel, _, _ = simulate_poisson_panel(np.random.default_rng(100 + seed))
            fit = fit_count_model(panel, CountFormula(), "poisson", offset=True)
            ratio = dispersion_diagnostics(fit).pearson_ratio
            within += 0.8 <= ratio <= 1.2
        assert within >= 24  # 80% of seeds in the nominal band

    def test_perfect_fit_ratio_zero(self):
        panel = make_panel([4] * 20)
        fit = fit_count_model(panel, CountFormula(time_linear=False))
        diag = dispersion_diagnostics(fit)
        assert diag.pearson_ratio == pytest.approx(0.0, abs=1e-12)

    def test_overdispersed_flagged(self, rng):
        y = rng.negative_binomial(n=1.0, p=0.2, size=100)  # heavy overdispersion
        y[0] = max(y[0], 1)
        fit = fit_count_model(make_panel(y), CountFormula(time_linear=False), "poisson")
        assert dispersion_diagnostics(fit).overdispersion_flag


class TestAlphaGrid:
    def test_recovers_generating_alpha(self):
        hits = 0
        grid = [0.25, 0.5, 1.0, 2.0, 4.0]
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n = 300
            mu = 8.0
            r = 1.0 / 1.0  # alpha = 1.0
            y = rng.negative_binomial(r, r / (r + mu), size=n)
            y[0] = max(y[0], 1)
            result = alpha_grid_search(make_panel(y), CountFormula(time_linear=False), grid)
            hits += result.alpha_star in (0.5, 1.0, 2.0)
        assert hits >= 14

    def test_poisson_data_prefers_small_alpha(self, rng):
        panel = make_panel(rng.poisson(6.0, size=200))
        result = alpha_grid_search(panel, CountFormula(time_linear=False),
                                   [0.05, 0.5, 2.0])
        lls = result.logliks
        assert lls[0.05] > lls[0.5] > lls[2.0]

    def test_single_point_grid(self, rng):
        panel = make_panel(rng.poisson(5.0, size=50))
        assert alpha_grid_search(panel, CountFormula(time_linear=False),
                                 [1.5]).alpha_star == 1.5


class TestLikelihoodRatio:
    def test_equal_logliks(self, rng):
        panel, _, _ = simulate_poisson_panel(rng)
        fit = fit_count_model(panel, CountFormula(), offset=True)
        result = likelihood_ratio_poisson_vs_nb(fit, fit)
        assert result.statistic == 0.0
        assert result.p_value == pytest.approx(0.5)

    def test_paper_style_arithmetic(self):
        # logliks -132.49 vs -132.39 give LR 0.20
        lr = 2 * (-132.39 - (-132.49))
        assert lr == pytest.approx(0.20, abs=1e-9)

    def test_overdispersed_rejects(self):
        hits = 0
        for seed in range(20):
            rng = np.random.default_rng(1000 + seed)
            mu, alpha = 10.0, 1.0
            r = 1.0 / alpha
            y = rng.negative_binomial(r, r / (r + mu), size=300)
            y[0] = max(y[0], 1)
            panel = make_panel(y)
            pois = fit_count_model(panel, CountFormula(time_linear=False), "poisson")
            nb = fit_count_model(panel, CountFormula(time_linear=False), "negbin", 1.0)
            result = likelihood_ratio_poisson_vs_nb(pois, nb)
            hits += result.p_value < 0.001
        assert hits >= 19


class TestExcessRisk:
    def test_identical_means_degenerate(self):
        panel = make_panel([4] * 20)
        fit = fit_count_model(panel, CountFormula(time_linear=False))
        signal = excess_risk(panel, fit)
        assert signal.degenerate
        np.testing.assert_allclose(signal.excess, 0.0, atol=1e-9)

    def test_log2_bump_shape(self, rng):
        y = np.full(30, 40)
        y[10] = 80
        panel = make_panel(y)
        fit = fit_count_model(panel, CountFormula(time_linear=False))
        signal = excess_risk(panel, fit)
        mu = fit.fitted_mean[10]
        expected = np.log((80 + 0.5) / (mu + 0.5))
        assert signal.excess[10] == pytest.approx(expected, abs=1e-12)
        assert signal.excess[10] == pytest.approx(np.log(2), abs=0.05)

    def test_exposure_cancels_exactly(self, rng):
        panel, _, _ = simulate_poisson_panel(rng)
        fit = fit_count_model(panel, CountFormula(), offset=True)
        signal = excess_risk(panel, fit)
        y = panel.nowcast_count[fit.row_mask]
        expo = panel.exposure[fit.row_mask]
        # the paper-style two-term form with any denominator must agree
        two_term = (np.log((y + 0.5) / expo) - np.log((fit.fitted_mean + 0.5) / expo))
        np.testing.assert_allclose(signal.excess, two_term, atol=1e-12)

    def test_regime_shift_visible_post_standardization(self, rng):
        y = np.concatenate([rng.poisson(5.0, 40), rng.poisson(15.0, 40)])
        y[0] = max(y[0], 1)
        panel = make_panel(y)
        fit = fit_count_model(panel, CountFormula(time_linear=False))
        signal = excess_risk(panel, fit)
        z = signal.standardized.z
        assert z[40:].mean() > z[:40].mean() + 0.5
