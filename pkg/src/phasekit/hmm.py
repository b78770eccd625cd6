"""Gaussian hidden Markov regime inference via EM (Baum-Welch).

Emissions are univariate Gaussians with a variance floor guarding
against point-mass collapse on sparse integer series; such collapse is
still surfaced through the degeneracy flag (any one-step-ahead
predictive density above 8, the pathological regime for this data).
State decoding is by posterior maximum, not Viterbi, matching the
per-month marginal interpretation used downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import TooManyStates

VARIANCE_FLOOR = 1e-4
EM_TOL = 1e-8
EM_MAX_ITER = 500
DENSITY_DEGENERACY_LIMIT = 8.0
DEFAULT_RESTARTS = 5


@dataclass(frozen=True)
class HmmFit:
    n_states: int
    means: np.ndarray
    variances: np.ndarray
    transition: np.ndarray
    initial: np.ndarray
    loglik: float
    loglik_history: tuple[float, ...]
    posterior: np.ndarray          # T × K smoothing probabilities
    states: np.ndarray             # argmax-posterior decoding
    degenerate: bool
    seed: int

    def occupancy(self) -> np.ndarray:
        """Months decoded into each state."""
        return np.bincount(self.states, minlength=self.n_states)


def _emission_densities(x: np.ndarray, means: np.ndarray,
                        variances: np.ndarray) -> np.ndarray:
    diff = x[:, None] - means[None, :]
    return np.exp(-0.5 * diff**2 / variances[None, :]) / np.sqrt(2 * np.pi * variances[None, :])


def _forward_backward(dens: np.ndarray, trans: np.ndarray, init: np.ndarray):
    """Scaled forward-backward; returns (gamma, xi_sum, loglik, scales)."""
    T, K = dens.shape
    alpha = np.zeros((T, K))
    scales = np.zeros(T)
    a = init * dens[0]
    scales[0] = a.sum()
    alpha[0] = a / scales[0]
    for t in range(1, T):
        a = (alpha[t - 1] @ trans) * dens[t]
        scales[t] = a.sum()
        alpha[t] = a / scales[t]

    beta = np.zeros((T, K))
    beta[-1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = (trans @ (dens[t + 1] * beta[t + 1])) / scales[t + 1]

    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)

    xi_sum = np.zeros((K, K))
    for t in range(T - 1):
        xi = (alpha[t][:, None] * trans) * (dens[t + 1] * beta[t + 1])[None, :]
        xi_sum += xi / scales[t + 1]

    return gamma, xi_sum, float(np.sum(np.log(scales))), scales


def _em_once(x: np.ndarray, K: int, rng: np.random.Generator):
    T = x.size
    order = np.sort(rng.choice(T, size=K, replace=False))
    means = np.sort(x[order] + rng.normal(0, 1e-3, size=K))
    variances = np.full(K, max(float(np.var(x)), VARIANCE_FLOOR))
    trans = np.full((K, K), 0.2 / max(K - 1, 1))
    np.fill_diagonal(trans, 0.8)
    init = np.full(K, 1.0 / K)

    history: list[float] = []
    degenerate = False
    ll_prev = -np.inf
    gamma = np.zeros((T, K))
    for _ in range(EM_MAX_ITER):
        dens = np.maximum(_emission_densities(x, means, variances), 1e-300)
        gamma, xi_sum, ll, scales = _forward_backward(dens, trans, init)
        if np.any(scales > DENSITY_DEGENERACY_LIMIT):
            degenerate = True
        if history and ll < history[-1] - 1e-9 * (1.0 + abs(history[-1])):
            raise RuntimeError("EM log-likelihood decreased; numerical failure")
        history.append(ll)
        if ll - ll_prev < EM_TOL and np.isfinite(ll_prev):
            break
        ll_prev = ll

        weights = gamma.sum(axis=0)
        means = (gamma * x[:, None]).sum(axis=0) / weights
        variances = np.maximum(
            (gamma * (x[:, None] - means[None, :]) ** 2).sum(axis=0) / weights,
            VARIANCE_FLOOR)
        rows = xi_sum.sum(axis=1, keepdims=True)
        trans = np.where(rows > 0, xi_sum / np.where(rows > 0, rows, 1.0),
                         1.0 / K)
        init = gamma[0] / gamma[0].sum()

    return means, variances, trans, init, history, gamma, degenerate


def hmm_fit(signal: np.ndarray, n_states: int, seed: int = 0,
            restarts: int = DEFAULT_RESTARTS) -> HmmFit:
    """Best-of-restarts EM fit of a K-state Gaussian HMM."""
    x = np.asarray(signal, dtype=float)
    if x.size <= 2 * n_states:
        raise TooManyStates(f"{n_states} states need > {2 * n_states} points, got {x.size}")

    if n_states == 1:
        # closed form: single Gaussian
        mean = float(np.mean(x))
        var = max(float(np.var(x)), VARIANCE_FLOOR)
        dens = np.maximum(_emission_densities(x, np.array([mean]), np.array([var])), 1e-300)
        ll = float(np.sum(np.log(dens[:, 0])))
        return HmmFit(1, np.array([mean]), np.array([var]), np.ones((1, 1)),
                      np.ones(1), ll, (ll,), np.ones((x.size, 1)),
                      np.zeros(x.size, dtype=int),
                      bool(np.any(dens[:, 0] > DENSITY_DEGENERACY_LIMIT)), seed)

    best = None
    for r in range(max(restarts, 1)):
        rng = np.random.default_rng(seed + r)
        means, variances, trans, init, history, gamma, degen = _em_once(x, n_states, rng)
        if best is None or history[-1] > best[4][-1]:
            best = (means, variances, trans, init, history, gamma, degen)

    means, variances, trans, init, history, gamma, degen = best
    return HmmFit(
        n_states=n_states, means=means, variances=variances, transition=trans,
        initial=init, loglik=history[-1], loglik_history=tuple(history),
        posterior=gamma, states=np.argmax(gamma, axis=1).astype(int),
        degenerate=degen, seed=seed)


@dataclass(frozen=True)
class HmmSelection:
    n_states_star: int
    bic: dict[int, float]
    loglik: dict[int, float]
    degenerate: dict[int, bool]
    failures: dict[int, str]


def hmm_select(signal: np.ndarray, k_range: list[int] | range = range(2, 9),
               restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> HmmSelection:
    """BIC model selection over state counts.

    BIC = −2·loglik + p·ln(n) with p = K² + 2K − 1 free parameters
    (transitions K(K−1), initial K−1, means K, variances K). Degeneracy
    flags ride along so callers can override the argmin when a fixed K is
    needed for framework alignment.
    """
    x = np.asarray(signal, dtype=float)
    n = x.size
    bic: dict[int, float] = {}
    ll: dict[int, float] = {}
    degen: dict[int, bool] = {}
    failures: dict[int, str] = {}
    for k in k_range:
        try:
            fit = hmm_fit(x, k, seed=seed, restarts=restarts)
        except Exception as exc:
            failures[k] = str(exc)
            continue
        p = k * k + 2 * k - 1
        bic[k] = -2.0 * fit.loglik + p * np.log(n)
        ll[k] = fit.loglik
        degen[k] = fit.degenerate
    if not bic:
        raise TooManyStates("no state count in the range could be fitted")
    k_star = min(bic, key=lambda k: bic[k])
    return HmmSelection(k_star, bic, ll, degen, failures)


def best_permutation_accuracy(pred: np.ndarray, truth: np.ndarray,
                              n_labels: int) -> float:
    """Decoding accuracy maximized over label permutations (K <= 8)."""
    if n_labels > 8:
        raise ValueError("brute-force alignment supported for K <= 8 only")
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    best = 0.0
    for perm in permutations(range(n_labels)):
        mapped = np.array(perm)[pred]
        best = max(best, float(np.mean(mapped == truth)))
    return best
