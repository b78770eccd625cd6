"""Cross-source and cross-method agreement measures.

Covers series agreement (Pearson, lagged cross-correlation with per-lag
significance bounds, min-max overlay scaling), categorical phase
agreement (raw/chance/Cohen's kappa with the full confusion matrix), and
partition agreement between clusterings (adjusted Rand via pair
counting, normalized mutual information with arithmetic-mean
normalization).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .errors import ConstantInput


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.size != y.size or x.size < 3:
        raise ValueError("need equal-length vectors with >= 3 points")
    xc, yc = x - x.mean(), y - y.mean()
    sx, sy = float(np.sqrt(xc @ xc)), float(np.sqrt(yc @ yc))
    if sx == 0 or sy == 0:
        raise ConstantInput("correlation undefined for constant input")
    return float(xc @ yc / (sx * sy))


@dataclass(frozen=True)
class CcfResult:
    lags: tuple[int, ...]
    r: dict[int, float]
    significance: dict[int, float]   # + / − 1.96 / sqrt(n_overlap) per lag
    best_lag: int
    best_r: float


def lagged_ccf(a: np.ndarray, b: np.ndarray, max_lag: int = 6) -> CcfResult:
    """Correlation of a_t with b_{t+lag} over the overlapping window.

    Positive lags mean b trails a: b reproduces a's values `lag` steps
    later. The best lag maximizes |r|.
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    n = x.size
    r: dict[int, float] = {}
    sig: dict[int, float] = {}
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            xa, yb = x[:n - lag] if lag else x, y[lag:]
        else:
            xa, yb = x[-lag:], y[:n + lag]
        if xa.size < 3:
            continue
        r[lag] = pearson(xa, yb)
        sig[lag] = 1.96 / math.sqrt(xa.size)
    best = max(r, key=lambda k: abs(r[k]))
    return CcfResult(lags=tuple(sorted(r)), r=r, significance=sig,
                     best_lag=best, best_r=r[best])


def minmax_scale(series: np.ndarray) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        raise ConstantInput("min-max scaling undefined for constant input")
    return (x - lo) / (hi - lo)


@dataclass(frozen=True)
class PhaseAgreement:
    n: int
    raw_agreement: float
    chance_agreement: float
    kappa: float
    confusion: dict[tuple[str, str], int]


def phase_agreement(p1: Sequence[Hashable], p2: Sequence[Hashable],
                    drop_label: Hashable | None = None) -> PhaseAgreement:
    """Raw and chance-corrected agreement between two phase sequences.

    chance = sum_k marginal1(k) · marginal2(k); kappa = (raw − chance) /
    (1 − chance). With `drop_label` set, months where the first sequence
    carries that label are excluded (the figure-style variant; the
    all-months kappa is the default).
    """
    if len(p1) != len(p2):
        raise ValueError("sequences must have equal length")
    pairs = [(str(a), str(b)) for a, b in zip(p1, p2)]
    if drop_label is not None:
        pairs = [(a, b) for a, b in pairs if a != str(drop_label)]
    n = len(pairs)
    if n == 0:
        raise ValueError("no overlapping months to compare")
    cats = sorted({a for a, _ in pairs} | {b for _, b in pairs})
    m1 = {c: sum(1 for a, _ in pairs if a == c) / n for c in cats}
    m2 = {c: sum(1 for _, b in pairs if b == c) / n for c in cats}
    raw = sum(1 for a, b in pairs if a == b) / n
    chance = sum(m1[c] * m2[c] for c in cats)
    kappa = (raw - chance) / (1.0 - chance) if chance < 1.0 else 1.0
    confusion: dict[tuple[str, str], int] = {}
    for a, b in pairs:
        confusion[(a, b)] = confusion.get((a, b), 0) + 1
    return PhaseAgreement(n=n, raw_agreement=raw, chance_agreement=chance,
                          kappa=kappa, confusion=confusion)


def _comb2(x: np.ndarray) -> np.ndarray:
    return x * (x - 1) / 2.0


def adjusted_rand_index(l1: Sequence[int], l2: Sequence[int]) -> float:
    """Pair-counting Rand index with expected-index correction.

    Degenerate pairs where the expected index equals the maximum (e.g.
    all-singletons against all-one-cluster) return 0 unless the
    partitions are identical, in which case 1.
    """
    a = np.asarray(l1)
    b = np.asarray(l2)
    if a.size != b.size:
        raise ValueError("label vectors must have equal length")
    cats_a = {c: i for i, c in enumerate(np.unique(a))}
    cats_b = {c: i for i, c in enumerate(np.unique(b))}
    table = np.zeros((len(cats_a), len(cats_b)))
    for x, y in zip(a, b):
        table[cats_a[x], cats_b[y]] += 1
    sum_cells = float(_comb2(table).sum())
    sum_rows = float(_comb2(table.sum(axis=1)).sum())
    sum_cols = float(_comb2(table.sum(axis=0)).sum())
    total = float(_comb2(np.array([a.size]))[0])
    expected = sum_rows * sum_cols / total if total else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0 if sum_cells == max_index else 0.0
    return (sum_cells - expected) / (max_index - expected)


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def normalized_mutual_information(l1: Sequence[int], l2: Sequence[int]) -> float:
    """NMI with arithmetic-mean normalization: I(X;Y) / ((H(X)+H(Y))/2)."""
    a = np.asarray(l1)
    b = np.asarray(l2)
    if a.size != b.size:
        raise ValueError("label vectors must have equal length")
    n = a.size
    cats_a = {c: i for i, c in enumerate(np.unique(a))}
    cats_b = {c: i for i, c in enumerate(np.unique(b))}
    table = np.zeros((len(cats_a), len(cats_b)))
    for x, y in zip(a, b):
        table[cats_a[x], cats_b[y]] += 1
    ha = _entropy(table.sum(axis=1), n)
    hb = _entropy(table.sum(axis=0), n)
    if ha + hb == 0:
        return 1.0  # both partitions trivial, hence identical
    mi = 0.0
    pa = table.sum(axis=1) / n
    pb = table.sum(axis=0) / n
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            if table[i, j] > 0:
                pij = table[i, j] / n
                mi += pij * math.log(pij / (pa[i] * pb[j]))
    return mi / ((ha + hb) / 2.0)


@dataclass(frozen=True)
class PartitionAgreement:
    ari: float
    nmi: float


def partition_agreement(l1: Sequence[int], l2: Sequence[int]) -> PartitionAgreement:
    return PartitionAgreement(ari=adjusted_rand_index(l1, l2),
                              nmi=normalized_mutual_information(l1, l2))
