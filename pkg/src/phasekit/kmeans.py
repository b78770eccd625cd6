"""K-means regime clustering over (risk level, local trend) features.

Both features are standardized independently before the trend coordinate
is upweighted, so neither dominates the Euclidean metric by scale alone.
Cluster counts are validated with silhouette (direct O(n²) computation)
and Calinski-Harabasz scores; clusters collapse onto low/mid/high
macro-bands through their risk-coordinate centroids.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import RiskSeries, standardize
from .errors import KExceedsPoints, ZeroVariance

DEFAULT_TREND_WEIGHT = 2.0
DEFAULT_RESTARTS = 10
MACRO_LOW_CUT = -0.5
MACRO_HIGH_CUT = 0.5


@dataclass(frozen=True)
class ClusterFit:
    n_clusters: int
    centroids: np.ndarray        # K × 2, weighted feature space
    labels: np.ndarray
    inertia: float
    silhouette: float
    calinski_harabasz: float
    trend_weight: float
    seed: int
    macro_bands: dict[int, str] | None = None

    def centroid_risk(self) -> np.ndarray:
        """Centroid risk coordinates in sigma units (unweighted axis)."""
        return self.centroids[:, 0]


def _features(risk: RiskSeries, trend_weight: float) -> np.ndarray:
    z_std, _, _ = standardize(risk.z)
    try:
        t_std, _, _ = standardize(risk.slope)
    except ZeroVariance:
        t_std = np.zeros_like(risk.slope)
    return np.column_stack([z_std, trend_weight * t_std])


def _plus_plus_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = [points[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(((points[:, None, :] - np.array(centers)[None, :, :]) ** 2).sum(-1), axis=1)
        total = d2.sum()
        if total <= 0:
            centers.append(points[rng.integers(n)])
            continue
        centers.append(points[rng.choice(n, p=d2 / total)])
    return np.array(centers)


def _lloyd(points: np.ndarray, centers: np.ndarray,
           max_iter: int = 300) -> tuple[np.ndarray, np.ndarray, float]:
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        labels = d2.argmin(axis=1)
        new_centers = centers.copy()
        for k in range(centers.shape[0]):
            members = points[labels == k]
            if members.size:
                new_centers[k] = members.mean(axis=0)
            else:
                # revive empty clusters at the current farthest point
                far = int(d2.min(axis=1).argmax())
                new_centers[k] = points[far]
        if np.allclose(new_centers, centers, atol=1e-12):
            centers = new_centers
            break
        centers = new_centers
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(points.shape[0]), labels].sum())
    return labels, centers, inertia


def silhouette_score(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette via direct pairwise distances.

    Singleton-cluster points contribute 0 by convention.
    """
    n = points.shape[0]
    dist = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(-1))
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    s = np.zeros(n)
    for i in range(n):
        own = labels == labels[i]
        n_own = own.sum()
        if n_own <= 1:
            s[i] = 0.0
            continue
        a = dist[i, own].sum() / (n_own - 1)
        b = min(dist[i, labels == other].mean() for other in uniq if other != labels[i])
        s[i] = (b - a) / max(a, b)
    return float(s.mean())


def calinski_harabasz_score(points: np.ndarray, labels: np.ndarray) -> float:
    n, _ = points.shape
    uniq = np.unique(labels)
    k = uniq.size
    if k < 2 or n <= k:
        raise ValueError("Calinski-Harabasz needs 2 <= K < n")
    overall = points.mean(axis=0)
    between = 0.0
    within = 0.0
    for c in uniq:
        members = points[labels == c]
        center = members.mean(axis=0)
        between += members.shape[0] * float(((center - overall) ** 2).sum())
        within += float(((members - center) ** 2).sum())
    if within == 0:
        return float("inf")
    return (between / (k - 1)) / (within / (n - k))


def kmeans_fit(risk: RiskSeries, n_clusters: int,
               trend_weight: float = DEFAULT_TREND_WEIGHT,
               seed: int = 0, restarts: int = DEFAULT_RESTARTS) -> ClusterFit:
    """Best-of-restarts Lloyd clustering from k-means++ style seeding."""
    points = _features(risk, trend_weight)
    n = points.shape[0]
    if n_clusters > n:
        raise KExceedsPoints(f"K={n_clusters} exceeds {n} points")

    best: tuple[np.ndarray, np.ndarray, float] | None = None
    for r in range(max(restarts, 1)):
        rng = np.random.default_rng(seed + r)
        centers0 = _plus_plus_seed(points, n_clusters, rng)
        labels, centers, inertia = _lloyd(points, centers0)
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia)
    labels, centers, inertia = best

    if n_clusters >= 2 and np.unique(labels).size >= 2:
        sil = silhouette_score(points, labels)
        ch = calinski_harabasz_score(points, labels)
    else:
        sil, ch = float("nan"), float("nan")
    return ClusterFit(n_clusters=n_clusters, centroids=centers, labels=labels,
                      inertia=inertia, silhouette=sil, calinski_harabasz=ch,
                      trend_weight=trend_weight, seed=seed)


@dataclass(frozen=True)
class KmeansSelection:
    k_star: int
    silhouettes: dict[int, float]
    calinski_harabasz: dict[int, float]


def kmeans_select(risk: RiskSeries, k_range: list[int] | range = range(3, 7),
                  trend_weight: float = DEFAULT_TREND_WEIGHT,
                  seed: int = 0) -> KmeansSelection:
    """Silhouette-maximizing cluster count with the full metrics table."""
    sils: dict[int, float] = {}
    chs: dict[int, float] = {}
    for k in k_range:
        fit = kmeans_fit(risk, k, trend_weight, seed)
        sils[k] = fit.silhouette
        chs[k] = fit.calinski_harabasz
    k_star = max(sils, key=lambda k: sils[k])
    return KmeansSelection(k_star=k_star, silhouettes=sils, calinski_harabasz=chs)


def macro_bands(fit: ClusterFit, low_cut: float = MACRO_LOW_CUT,
                high_cut: float = MACRO_HIGH_CUT) -> ClusterFit:
    """Assign each cluster to a low/mid/high band by centroid risk."""
    bands: dict[int, str] = {}
    for k, r in enumerate(fit.centroid_risk()):
        if r <= low_cut:
            bands[k] = "low"
        elif r >= high_cut:
            bands[k] = "high"
        else:
            bands[k] = "mid"
    return replace(fit, macro_bands=bands)
