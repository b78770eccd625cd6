"""Poisson and Negative Binomial (NB2) log-link count regression with
exposure offsets, fitted by iteratively reweighted least squares.

The NB2 family (Var = mu + alpha·mu^2) is fitted at a fixed dispersion
alpha supplied by the caller; `alpha_grid_search` profiles the
log-likelihood over a dispersion grid so the caller can trade fit
against residual structure. The fitted model feeds the media-adjusted
excess-risk signal: the log-space gap between observed and expected
counts, in which the exposure denominator cancels exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln
from scipy.stats import chi2, norm

from .core import MonthlyPanel, RiskSeries, risk_series
from .errors import AllZeroResponse, SingularDesign, ZeroVariance
from .months import MonthIndex

MAX_IRLS_ITER = 100
LOGLIK_RTOL = 1e-10
EXCESS_EPS = 0.5  # continuity constant; the raw formula is undefined at y = 0
DISPERSION_FLAG_RATIO = 1.5


@dataclass(frozen=True)
class CountFormula:
    time_linear: bool = True
    time_quadratic: bool = False
    media: bool = False


@dataclass(frozen=True)
class CountModelFit:
    family: str
    alpha: float | None
    terms: tuple[str, ...]
    coefficients: dict[str, float]
    standard_errors: dict[str, float]
    p_values: dict[str, float]
    rate_ratios: dict[str, float]
    loglik: float
    pearson_dispersion: float
    fitted_mean: np.ndarray
    row_mask: np.ndarray
    response: np.ndarray
    design_meta: dict[str, float | bool]
    converged: bool = True
    iterations: int = 0

    def coefficient_table(self) -> list[dict[str, float | str]]:
        """Rows shaped like published GLM coefficient tables."""
        return [
            {
                "term": t,
                "estimate": self.coefficients[t],
                "se": self.standard_errors[t],
                "rate_ratio": self.rate_ratios[t],
                "p": self.p_values[t],
            }
            for t in self.terms
        ]


@dataclass(frozen=True)
class ExcessRiskSignal:
    months: tuple[MonthIndex, ...]
    excess: np.ndarray
    standardized: RiskSeries | None
    degenerate: bool = False


def _design(panel: MonthlyPanel, formula: CountFormula,
            rows: np.ndarray) -> tuple[np.ndarray, tuple[str, ...], dict[str, float | bool]]:
    n = int(rows.sum())
    cols = [np.ones(n)]
    names = ["intercept"]
    meta: dict[str, float | bool] = {}

    t = np.arange(panel.n_months, dtype=float)[rows]
    t_mean, t_sd = float(t.mean()), float(t.std())
    if formula.time_linear or formula.time_quadratic:
        if t_sd == 0:
            raise SingularDesign("time covariate is constant")
        t_std = (t - t_mean) / t_sd
        meta["time_center"] = t_mean
        meta["time_scale"] = t_sd
        if formula.time_linear:
            cols.append(t_std)
            names.append("time_linear")
        if formula.time_quadratic:
            cols.append(t_std**2)
            names.append("time_quadratic")
    if formula.media:
        if panel.media_index is None:
            raise ValueError("formula requests media but panel has no media index")
        media = panel.media_index[rows].astype(float)
        m_mean, m_sd = float(media.mean()), float(media.std())
        if m_sd == 0:
            raise SingularDesign("media covariate is constant")
        cols.append((media - m_mean) / m_sd)
        names.append("media_std")
        meta["media_center"] = m_mean
        meta["media_scale"] = m_sd
    return np.column_stack(cols), tuple(names), meta


def _loglik(y: np.ndarray, mu: np.ndarray, family: str, alpha: float | None) -> float:
    if family == "poisson":
        return float(np.sum(y * np.log(mu) - mu - gammaln(y + 1)))
    r = 1.0 / alpha
    return float(np.sum(gammaln(y + r) - gammaln(r) - gammaln(y + 1)
                        + r * np.log(r / (r + mu)) + y * np.log(mu / (r + mu))))


def _variance(mu: np.ndarray, family: str, alpha: float | None) -> np.ndarray:
    return mu if family == "poisson" else mu + alpha * mu**2


def fit_count_model(panel: MonthlyPanel, formula: CountFormula,
                    family: str = "poisson", alpha: float | None = None,
                    offset: bool = False) -> CountModelFit:
    """IRLS maximum-likelihood fit on rounded nowcast counts.

    With `offset` the linear predictor includes log(exposure) and the fit
    restricts to exposure-covered months (log-offsets are undefined at
    zero exposure; exclusion is honest, flooring is not).
    """
    if family not in ("poisson", "negbin"):
        raise ValueError(f"unknown family {family!r}")
    if family == "negbin":
        if alpha is None or alpha <= 0:
            raise ValueError("negbin requires a fixed dispersion alpha > 0")
    else:
        alpha = None

    rows = np.ones(panel.n_months, dtype=bool)
    off = np.zeros(panel.n_months)
    if offset:
        if panel.exposure is None or panel.exposure_mask is None:
            raise ValueError("offset requested but panel has no exposure")
        rows = panel.exposure_mask.copy()
        off = np.where(rows, np.log(np.where(rows, panel.exposure, 1.0)), 0.0)

    y = np.rint(panel.nowcast_count[rows]).astype(float)
    if panel.n_months < 10:
        raise ValueError("need at least 10 months to fit a count model")
    if not np.any(y > 0):
        raise AllZeroResponse("response is identically zero")
    X, names, meta = _design(panel, formula, rows)
    meta["offset"] = offset
    meta["family"] = family
    if alpha is not None:
        meta["alpha"] = alpha
    offs = off[rows]

    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularDesign("design matrix is rank-deficient")

    beta = np.zeros(X.shape[1])
    expo_mean = float(np.exp(offs).mean()) if offset else 1.0
    beta[0] = math.log(max(y.mean(), 1e-8) / expo_mean)

    eta = X @ beta + offs
    mu = np.exp(eta)
    ll = _loglik(y, mu, family, alpha)
    converged = False
    it = 0
    for it in range(1, MAX_IRLS_ITER + 1):
        w = mu if family == "poisson" else mu / (1.0 + alpha * mu)
        z = (eta - offs) + (y - mu) / mu
        WX = X * w[:, None]
        try:
            beta_new = np.linalg.solve(X.T @ WX, WX.T @ z)
        except np.linalg.LinAlgError as exc:
            raise SingularDesign(f"weighted normal equations singular: {exc}") from exc
        # step-halve if the update overshoots the likelihood
        step = 1.0
        for _ in range(30):
            cand = beta + step * (beta_new - beta)
            mu_c = np.exp(np.clip(X @ cand + offs, -500, 500))
            ll_c = _loglik(y, np.maximum(mu_c, 1e-300), family, alpha)
            if np.isfinite(ll_c) and ll_c >= ll - 1e-12:
                break
            step /= 2.0
        beta = beta + step * (beta_new - beta)
        eta = X @ beta + offs
        mu = np.exp(eta)
        ll_new = _loglik(y, mu, family, alpha)
        if abs(ll_new - ll) < LOGLIK_RTOL * (abs(ll) + 1.0):
            ll = ll_new
            converged = True
            break
        ll = ll_new

    # observed information for Wald standard errors
    if family == "poisson":
        w_obs = mu
    else:
        r = 1.0 / alpha
        w_obs = (y + r) * alpha * mu / (1.0 + alpha * mu) ** 2
    info = X.T @ (X * w_obs[:, None])
    try:
        vcov = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise SingularDesign(f"information matrix singular: {exc}") from exc
    se = np.sqrt(np.maximum(np.diag(vcov), 0.0))
    zstat = np.divide(beta, se, out=np.zeros_like(beta), where=se > 0)
    pvals = 2 * norm.sf(np.abs(zstat))

    chisq = float(np.sum((y - mu) ** 2 / _variance(mu, family, alpha)))
    dof = max(y.size - X.shape[1], 1)

    return CountModelFit(
        family=family, alpha=alpha, terms=names,
        coefficients=dict(zip(names, beta.tolist())),
        standard_errors=dict(zip(names, se.tolist())),
        p_values=dict(zip(names, pvals.tolist())),
        rate_ratios=dict(zip(names, np.exp(beta).tolist())),
        loglik=ll, pearson_dispersion=chisq / dof,
        fitted_mean=mu, row_mask=rows, response=y,
        design_meta=meta, converged=converged, iterations=it,
    )


@dataclass(frozen=True)
class DispersionDiagnostics:
    pearson_chisq: float
    pearson_ratio: float
    overdispersion_flag: bool


def dispersion_diagnostics(fit: CountModelFit) -> DispersionDiagnostics:
    """Pearson chi-squared over residual df; flags ratio > 1.5."""
    y, mu = fit.response, fit.fitted_mean
    chisq = float(np.sum((y - mu) ** 2 / _variance(mu, fit.family, fit.alpha)))
    dof = max(y.size - len(fit.terms), 1)
    ratio = chisq / dof
    return DispersionDiagnostics(chisq, ratio, ratio > DISPERSION_FLAG_RATIO)


@dataclass(frozen=True)
class AlphaGridResult:
    alpha_star: float
    logliks: dict[float, float]
    failures: dict[float, str] = field(default_factory=dict)


def alpha_grid_search(panel: MonthlyPanel, formula: CountFormula,
                      grid: list[float], offset: bool = False) -> AlphaGridResult:
    """Profile the NB log-likelihood over a dispersion grid.

    Returns the maximizer and the whole curve; callers may deliberately
    override the maximizer when residual structure matters more than fit.
    """
    logliks: dict[float, float] = {}
    failures: dict[float, str] = {}
    for a in grid:
        if a <= 0:
            raise ValueError("dispersion grid values must be positive")
        try:
            logliks[a] = fit_count_model(panel, formula, "negbin", a, offset).loglik
        except Exception as exc:  # per-point failures are skipped with a flag
            failures[a] = str(exc)
    if not logliks:
        raise AllZeroResponse("every grid point failed to fit")
    best = max(logliks, key=lambda a: logliks[a])
    return AlphaGridResult(alpha_star=best, logliks=logliks, failures=failures)


@dataclass(frozen=True)
class LikelihoodRatioResult:
    statistic: float
    p_value: float
    negative_lr_clamped: bool = False


def likelihood_ratio_poisson_vs_nb(poisson_fit: CountModelFit,
                                   nb_fit: CountModelFit) -> LikelihoodRatioResult:
    """Boundary-corrected LR test of NB against its Poisson limit.

    Under the null the statistic follows the ½chi²(0) + ½chi²(1) mixture,
    so p = ½ · P(chi²(1) >= LR), giving 0.5 at LR = 0.
    """
    lr = 2.0 * (nb_fit.loglik - poisson_fit.loglik)
    clamped = lr < 0
    lr = max(lr, 0.0)
    p = 0.5 * float(chi2.sf(lr, df=1))
    return LikelihoodRatioResult(statistic=lr, p_value=p, negative_lr_clamped=clamped)


def excess_risk(panel: MonthlyPanel, fit: CountModelFit) -> ExcessRiskSignal:
    """Log-space gap between observed and model-expected counts.

    excess_t = log((y_t + eps) / (mu_t + eps)) with eps = 0.5. The
    exposure denominator cancels identically, so the signal isolates
    departures from what tool availability and attention would predict.
    The standardized form is the input to regime detection; a constant
    excess (y = mu everywhere) yields a degenerate flag instead of
    z-scores.
    """
    rows = fit.row_mask
    months = tuple(m for m, keep in zip(panel.months, rows) if keep)
    y = panel.nowcast_count[rows].astype(float)
    excess = np.log((y + EXCESS_EPS) / (fit.fitted_mean + EXCESS_EPS))
    try:
        standardized = risk_series(months, excess)
        degenerate = False
    except ZeroVariance:
        standardized = None
        degenerate = True
    return ExcessRiskSignal(months=months, excess=excess,
                            standardized=standardized, degenerate=degenerate)
