"""ARIMA count forecasting: stationarity testing, conditional-sum-of-squares
fitting with Gauss-Newton refinement, AIC order selection, and 12-month
forecast bands mapped onto projected governance phases.

Conventions: the model is phi(B)(1-B)^d y_t = c + theta(B) e_t with the
positive-theta MA sign (a strongly mean-reverting MA(1) has theta_1 near
-1). Differenced models (d >= 1) carry no constant; level models include
one. Forecast variance uses psi-weights of the integrated representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SeriesTooShort
from .phases import PhaseThresholds, SixPhase, classify_six

# Dickey-Fuller critical values for the constant-only regression,
# rows indexed by sample size (linear interpolation between rows).
_ADF_CRIT_N = np.array([25, 50, 100, 250, 500, 100000], dtype=float)
_ADF_CRIT = {
    0.01: np.array([-3.75, -3.58, -3.51, -3.46, -3.44, -3.43]),
    0.05: np.array([-3.00, -2.93, -2.89, -2.88, -2.87, -2.86]),
    0.10: np.array([-2.63, -2.60, -2.58, -2.57, -2.57, -2.57]),
}

DEFAULT_ORDER_GRID: tuple[tuple[int, int, int], ...] = (
    (1, 0, 0), (0, 1, 1), (1, 1, 1), (2, 1, 2),
    (1, 1, 0), (2, 1, 0), (0, 1, 2), (2, 1, 1), (1, 1, 2),
)


@dataclass(frozen=True)
class AdfResult:
    tau: float
    p_band: str
    lags: int
    n_used: int


def adf_test(series: np.ndarray, max_lag: int | None = None) -> AdfResult:
    """Augmented Dickey-Fuller regression with constant.

    The p-value is reported as a band ({<0.01, <0.05, <0.10, >=0.10})
    from tabulated critical values interpolated in sample size.
    """
    y = np.asarray(series, dtype=float)
    n = y.size
    lags = max_lag if max_lag is not None else int(math.floor((n - 1) ** (1.0 / 3.0)))
    dy = np.diff(y)
    rows = n - 1 - lags
    if rows < (lags + 2) + 5:  # regressors plus headroom
        raise SeriesTooShort(f"ADF with {lags} lags needs a longer series than {n}")

    # design: [1, y_{t-1}, dy_{t-1}, ..., dy_{t-lags}]
    X = [np.ones(rows), y[lags:-1]]
    for i in range(1, lags + 1):
        X.append(dy[lags - i:-i])
    X = np.column_stack(X)
    target = dy[lags:]
    beta, _, _, _ = np.linalg.lstsq(X, target, rcond=None)
    resid = target - X @ beta
    dof = rows - X.shape[1]
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    tau = float(beta[1] / math.sqrt(cov[1, 1]))

    def crit(level: float) -> float:
        return float(np.interp(rows, _ADF_CRIT_N, _ADF_CRIT[level]))

    if tau <= crit(0.01):
        band = "<0.01"
    elif tau <= crit(0.05):
        band = "<0.05"
    elif tau <= crit(0.10):
        band = "<0.10"
    else:
        band = ">=0.10"
    return AdfResult(tau=tau, p_band=band, lags=lags, n_used=rows)


@dataclass(frozen=True)
class ArimaFit:
    order: tuple[int, int, int]
    constant: float                 # process mean of the differenced series
    ar: np.ndarray
    ma: np.ndarray
    sigma2: float
    loglik: float
    aic: float
    residuals: np.ndarray
    history: np.ndarray
    stationary: bool
    invertible: bool
    converged: bool

    @property
    def n_params(self) -> int:
        p, d, q = self.order
        return p + q + 1 + (1 if d == 0 else 0)


def _css_residuals(w: np.ndarray, mean: float, ar: np.ndarray,
                   ma: np.ndarray) -> np.ndarray:
    """Zero-initialized conditional residuals in mean-deviation form.

    Pre-sample deviations and innovations are taken as zero, so every
    order produces one residual per observation and log-likelihoods are
    comparable across the selection grid.
    """
    p, q = ar.size, ma.size
    n = w.size
    dev = w - mean
    e = np.zeros(n)
    for t in range(n):
        acc = dev[t]
        for i in range(p):
            if t - 1 - i >= 0:
                acc -= ar[i] * dev[t - 1 - i]
        for j in range(q):
            if t - 1 - j >= 0:
                acc -= ma[j] * e[t - 1 - j]
        e[t] = acc
    return e


def _poly_roots_outside(coefs: np.ndarray, sign: float,
                        margin: float = 1e-9) -> bool:
    """True when 1 + sign·(c1 z + c2 z² + ...) has all roots outside |z|=1."""
    if coefs.size == 0:
        return True
    poly = np.concatenate([[1.0], sign * coefs])
    roots = np.roots(poly[::-1])
    return bool(np.all(np.abs(roots) > 1.0 + margin)) if roots.size else True


def arima_fit(series: np.ndarray, order: tuple[int, int, int]) -> ArimaFit:
    """CSS estimation refined by damped Gauss-Newton; deterministic."""
    p, d, q = order
    y = np.asarray(series, dtype=float)
    if y.size - d <= p + q + 5:
        raise SeriesTooShort(f"series too short for ARIMA{order}")
    w = np.diff(y, n=d) if d > 0 else y.copy()
    use_constant = d == 0

    k = (1 if use_constant else 0) + p + q
    params = np.zeros(k)
    if use_constant:
        params[0] = float(np.mean(w))

    def unpack(vec: np.ndarray):
        i = 1 if use_constant else 0
        return (float(vec[0]) if use_constant else 0.0,
                vec[i:i + p], vec[i + p:i + p + q])

    def resid(vec: np.ndarray) -> np.ndarray:
        c, ar, ma = unpack(vec)
        return _css_residuals(w, c, ar, ma)

    def admissible(vec: np.ndarray) -> bool:
        _, ar_c, ma_c = unpack(vec)
        return (_poly_roots_outside(np.asarray(ar_c), -1.0, margin=1e-3)
                and _poly_roots_outside(np.asarray(ma_c), 1.0, margin=1e-3))

    converged = True
    if k > 0:
        lam = 1e-3
        e = resid(params)
        ss = float(e @ e)
        converged = False
        for _ in range(200):
            m = e.size
            J = np.zeros((m, k))
            eps = 1e-6
            for j in range(k):
                bump = params.copy()
                bump[j] += eps
                J[:, j] = (resid(bump) - e) / eps
            JtJ = J.T @ J
            g = J.T @ e
            stepped = False
            for _ in range(40):
                try:
                    delta = np.linalg.solve(JtJ + lam * np.eye(k), -g)
                except np.linalg.LinAlgError:
                    lam *= 10
                    continue
                cand = params + delta
                if not admissible(cand):
                    lam *= 10
                    continue
                e_new = resid(cand)
                ss_new = float(e_new @ e_new)
                if np.isfinite(ss_new) and ss_new <= ss:
                    params, e, ss_prev, ss = cand, e_new, ss, ss_new
                    lam = max(lam / 3, 1e-12)
                    stepped = True
                    break
                lam *= 10
            if not stepped:
                converged = True
                break
            if ss_prev - ss < 1e-12 * (1.0 + ss):
                converged = True
                break
        c, ar, ma = unpack(params)
        e = resid(params)
    else:
        c, ar, ma = 0.0, np.zeros(0), np.zeros(0)
        e = w.copy()

    m = e.size
    sigma2 = float(e @ e) / m if m else float("nan")
    sigma2 = max(sigma2, 1e-12)
    loglik = -0.5 * m * (math.log(2 * math.pi * sigma2) + 1.0)
    n_params = p + q + 1 + (1 if use_constant else 0)
    return ArimaFit(
        order=order, constant=c, ar=np.asarray(ar, dtype=float),
        ma=np.asarray(ma, dtype=float), sigma2=sigma2, loglik=loglik,
        aic=2 * n_params - 2 * loglik, residuals=e, history=y,
        stationary=_poly_roots_outside(np.asarray(ar, dtype=float), -1.0),
        invertible=_poly_roots_outside(np.asarray(ma, dtype=float), 1.0),
        converged=converged)


@dataclass(frozen=True)
class ArimaSelection:
    best: ArimaFit
    table: dict[tuple[int, int, int], float]   # order -> AIC
    failures: dict[tuple[int, int, int], str]


def arima_select(series: np.ndarray,
                 grid: tuple[tuple[int, int, int], ...] = DEFAULT_ORDER_GRID) -> ArimaSelection:
    """Fit every order in the grid and keep the AIC minimizer."""
    table: dict[tuple[int, int, int], float] = {}
    fits: dict[tuple[int, int, int], ArimaFit] = {}
    failures: dict[tuple[int, int, int], str] = {}
    for order in grid:
        try:
            fit = arima_fit(series, order)
            fits[order] = fit
            table[order] = fit.aic
        except Exception as exc:
            failures[order] = str(exc)
    if not fits:
        raise SeriesTooShort("every order in the grid failed to fit")
    best_order = min(table, key=lambda o: table[o])
    return ArimaSelection(best=fits[best_order], table=table, failures=failures)


def _integrated_ar(ar: np.ndarray, d: int) -> np.ndarray:
    """Coefficients Phi_i of phi(B)(1-B)^d written as 1 − sum Phi_i B^i."""
    poly = np.concatenate([[1.0], -ar])  # phi(B)
    diff = np.array([1.0, -1.0])
    for _ in range(d):
        poly = np.convolve(poly, diff)
    return -poly[1:]


def psi_weights(fit: ArimaFit, horizon: int) -> np.ndarray:
    """MA(inf) weights of the integrated model, psi_0..psi_{horizon-1}."""
    _, d, q = fit.order
    big_ar = _integrated_ar(fit.ar, d)
    psi = np.zeros(horizon)
    psi[0] = 1.0
    for j in range(1, horizon):
        acc = fit.ma[j - 1] if j - 1 < q else 0.0
        for i in range(min(j, big_ar.size)):
            acc += big_ar[i] * psi[j - 1 - i]
        psi[j] = acc
    return psi


@dataclass(frozen=True)
class ForecastBand:
    horizons: tuple[int, ...]
    point: np.ndarray
    lower95: np.ndarray
    upper95: np.ndarray
    projected_phase: tuple[SixPhase, ...]
    negative_lower_warning: bool


def forecast(fit: ArimaFit, horizon: int = 12,
             thresholds: PhaseThresholds | None = None,
             risk_mean: float = 0.0, risk_sd: float = 1.0) -> ForecastBand:
    """Recursive point forecasts with psi-weight 95% bands.

    Each horizon's projected phase comes from the forecast's z-score under
    the supplied risk-mapping context with a zero-trend assumption; count
    data can produce negative lower bands, which are reported as-is with a
    warning flag.
    """
    p, d, q = fit.order
    y = fit.history
    big_ar = _integrated_ar(fit.ar, d)
    r = big_ar.size

    # residuals aligned to y's time axis (one residual per differenced obs)
    e_full = np.zeros(y.size)
    e_full[d:] = fit.residuals

    # with the mean parameterization, phi(B)((1-B)^d y - mu) = theta(B) e
    # unrolls to Phi(B) y = mu(1 - sum phi_i) + theta(B) e
    intercept = fit.constant * (1.0 - float(np.sum(fit.ar))) if d == 0 else 0.0

    extended = list(y)
    e_ext = list(e_full)
    for h in range(1, horizon + 1):
        t = y.size + h - 1
        acc = intercept
        for i in range(r):
            acc += big_ar[i] * extended[t - 1 - i]
        for j in range(q):
            idx = t - 1 - j
            if idx < y.size:
                acc += fit.ma[j] * e_ext[idx]
        extended.append(acc)
        e_ext.append(0.0)

    point = np.array(extended[y.size:])
    psi = psi_weights(fit, horizon)
    var = fit.sigma2 * np.cumsum(psi**2)
    half = 1.96 * np.sqrt(var)
    lower, upper = point - half, point + half

    th = thresholds or PhaseThresholds(theta_low=-0.3, theta_high=0.3)
    phases = tuple(
        classify_six(max(val, 0.0), (val - risk_mean) / risk_sd, 0.0, th)
        for val in point
    )
    return ForecastBand(
        horizons=tuple(range(1, horizon + 1)), point=point,
        lower95=lower, upper95=upper, projected_phase=phases,
        negative_lower_warning=bool(np.any(lower < 0)))
