"""Shape analysis of index families and early-warning classification."""

import os
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_positive_int, check_unit_interval
from .exceptions import (
    EmptyIntersection,
    KTooLarge,
    Misalignment,
    RangeTooSmall,
    SeriesTooShort,
    TooFewRows,
    UnknownLabel,
)
from .indices import IndexSeries, window_norms
from .landscape import c1_series
from .marketdata import log_returns

__all__ = [
    "DEFAULT_SEED",
    "default_seed",
    "minmax_scale",
    "NormalizedIndexSet",
    "normalize_indices",
    "ClusterResult",
    "KMeans",
    "kmeans",
    "inertia_curve",
    "elbow_select",
    "PCA2",
    "pca2",
    "average_index",
    "EwsVerdict",
    "detect_ews",
    "EwsResult",
    "early_warning",
]

DEFAULT_SEED = 42


def default_seed() -> int:
    """``TDA_SEED`` from the environment, else 42."""
    raw = os.environ.get("TDA_SEED")
    return int(raw) if raw not in (None, "") else DEFAULT_SEED


def minmax_scale(values) -> np.ndarray:
    """Scale to [0, 1]; a constant input maps to zeros."""
    v = np.asarray(values, dtype=float)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return np.clip((v - lo) / (hi - lo), 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class NormalizedIndexSet:
    labels: tuple
    dates: np.ndarray
    matrix: np.ndarray

    def row(self, label) -> np.ndarray:
        try:
            return self.matrix[self.labels.index(label)]
        except ValueError:
            raise UnknownLabel(f"no index labelled {label!r}") from None


def normalize_indices(indices, labels=None) -> NormalizedIndexSet:
    """Crop indices to their common dates and min-max scale each one."""
    indices = list(indices)
    if not indices:
        raise ValueError("need at least one index")
    if any(len(s) == 0 for s in indices):
        raise ValueError("indices must be nonempty")
    labels = tuple(labels) if labels is not None else tuple(s.name for s in indices)
    common = indices[0].dates
    for s in indices[1:]:
        common = np.intersect1d(common, s.dates)
    if common.size == 0:
        raise EmptyIntersection("the indices share no dates")
    rows = [minmax_scale(s.values[np.isin(s.dates, common)]) for s in indices]
    return NormalizedIndexSet(labels, common, np.vstack(rows))


# -- k-means ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ClusterResult:
    k: int
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    inertia_history: list = field(default_factory=list)

    def distances(self, rows) -> np.ndarray:
        """Euclidean distance of each row to its own centroid."""
        rows = np.asarray(rows, dtype=float)
        return np.linalg.norm(rows - self.centroids[self.assignments], axis=1)


def _exact_mean(rows):
    """Column mean, shifted by the first row so identical rows reproduce it exactly."""
    base = rows[0]
    return base + (rows - base).mean(axis=0)


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    closest = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a centre already; take the next unused row
            nxt = next(i for i in range(n) if i not in chosen)
        chosen.append(nxt)
        closest = np.minimum(closest, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[chosen].copy()


def _lloyd(X, centroids, max_iter):
    history = []
    labels = None
    for _ in range(max_iter):
        d2 = _sq_dists(X, centroids)
        new = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(X)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(len(centroids)):
            members = labels == j
            if members.any():
                centroids[j] = _exact_mean(X[members])
            else:
                # empty cluster: move it to the point worst served by its centre
                far = int(d2[np.arange(len(X)), labels].argmax())
                centroids[j] = X[far]
    d2 = _sq_dists(X, centroids)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(len(X)), labels].sum())
    return labels, centroids, inertia, history


class KMeans(ClusterMixin, BaseEstimator):
    """Lloyd's algorithm with seeded k-means++ initialisation.

    Iterates until the assignment no longer changes. ``inertia_history_``
    records the within-cluster sum of squares seen at every assignment step.
    """

    def __init__(self, n_clusters=8, seed=DEFAULT_SEED, max_iter=300):
        self.n_clusters = n_clusters
        self.seed = seed
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        k = check_positive_int(self.n_clusters, "n_clusters")
        if k > X.shape[0]:
            raise KTooLarge(f"k={k} exceeds the number of rows ({X.shape[0]})")
        rng = np.random.default_rng(self.seed)
        centroids = _kmeanspp(X, k, rng)
        labels, centroids, inertia, history = _lloyd(X, centroids, self.max_iter)
        self.labels_ = labels
        self.cluster_centers_ = centroids
        self.inertia_ = inertia
        self.inertia_history_ = history
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=float)
        return _sq_dists(X, self.cluster_centers_).argmin(axis=1)


def kmeans(rows, k, seed=DEFAULT_SEED) -> ClusterResult:
    km = KMeans(k, seed).fit(rows)
    return ClusterResult(k, km.labels_, km.cluster_centers_, km.inertia_, km.inertia_history_)


def inertia_curve(rows, k_range, seed=DEFAULT_SEED) -> dict:
    return {int(k): kmeans(rows, int(k), seed).inertia for k in k_range}


def elbow_select(rows, k_range, seed=DEFAULT_SEED, curve=None) -> int:
    """k with the largest discrete second difference of inertia.

    Ties go to the smaller k. A curve with no positive curvature anywhere
    (e.g. all rows identical) has no elbow; the smallest k is returned.
    """
    ks = sorted(int(k) for k in k_range)
    if len(ks) < 3:
        raise RangeTooSmall("the elbow rule needs at least 3 candidate values of k")
    rows = np.asarray(rows, dtype=float)
    if ks[0] < 1 or ks[-1] > rows.shape[0]:
        raise KTooLarge(f"k range {ks[0]}..{ks[-1]} must lie within 1..{rows.shape[0]}")
    curve = curve or inertia_curve(rows, ks, seed)
    inertia = np.array([curve[k] for k in ks])
    second = inertia[:-2] - 2.0 * inertia[1:-1] + inertia[2:]
    scale = max(abs(inertia[0]), 1.0)
    if second.max() <= 1e-12 * scale:
        return ks[0]
    return ks[1 + int(np.argmax(second))]


# -- PCA ------------------------------------------------------------------------

class PCA2(TransformerMixin, BaseEstimator):
    """Projection on the leading principal directions via eigh of the covariance.

    Each component is signed so that its largest-magnitude loading is
    positive, which makes the output reproducible across platforms.
    """

    def __init__(self, n_components=2):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if X.shape[0] < 2:
            raise TooFewRows("PCA needs at least 2 rows")
        self.mean_ = X.mean(axis=0)
        cov = np.cov(X - self.mean_, rowvar=False, ddof=1).reshape(X.shape[1], X.shape[1])
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1][: self.n_components]
        comps = evecs[:, order].T
        if comps.shape[0] < self.n_components:
            comps = np.vstack([comps, np.zeros((self.n_components - comps.shape[0], X.shape[1]))])
        for c in comps:
            if c.size and c[np.argmax(np.abs(c))] < 0:
                c *= -1.0
        self.components_ = comps
        ev = np.clip(evals[order], 0.0, None)
        self.explained_variance_ = np.pad(ev, (0, self.n_components - len(ev)))
        total = np.clip(evals, 0.0, None).sum()
        self.explained_variance_ratio_ = self.explained_variance_ / total if total > 0 else self.explained_variance_
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=float)
        return (X - self.mean_) @ self.components_.T

    def inverse_transform(self, Z):
        check_is_fitted(self)
        return np.asarray(Z) @ self.components_ + self.mean_


def pca2(rows) -> np.ndarray:
    return PCA2(2).fit_transform(rows)


def average_index(normalized: NormalizedIndexSet, subset) -> IndexSeries:
    """Pointwise mean of the selected normalized rows."""
    subset = list(subset)
    if not subset:
        raise ValueError("subset must be nonempty")
    rows = np.vstack([normalized.row(label) for label in subset])
    return IndexSeries("average", normalized.dates, _exact_mean(rows), tuple(subset))


# -- early warning signals ----------------------------------------------------

@dataclass(frozen=True)
class EwsVerdict:
    classification: str
    cluster_id: int | None
    fraction_high: float
    max_gap: int | None
    n_high: int
    k: int
    clusters: list = field(default_factory=list)

    def to_dict(self):
        return {
            "classification": self.classification,
            "cluster_id": self.cluster_id,
            "fraction_high": self.fraction_high,
            "max_gap": self.max_gap,
            "n_high": self.n_high,
            "k": self.k,
            "clusters": self.clusters,
        }


def detect_ews(x_scaled, y_scaled, k=None, seed=DEFAULT_SEED, gap_tolerance=5,
               strong_threshold=0.5, k_range=range(1, 9), threshold=0.5) -> EwsVerdict:
    """Classify an early warning signal from (log price, C1) points.

    Clusters the points ``(x_t, y_t)`` with k-means. A cluster qualifies when
    it holds points with ``y > threshold`` whose time positions never jump by
    more than ``gap_tolerance``. The signal is strong if the qualifying
    cluster's share of such points exceeds ``strong_threshold``, weak
    otherwise, and absent if no cluster qualifies. When several clusters
    qualify, the one with the largest share wins (ties: lowest id).

    ``k=None`` picks k by :func:`elbow_select` over ``k_range``.
    """
    x = check_unit_interval(x_scaled, "x_scaled")
    y = check_unit_interval(y_scaled, "y_scaled")
    if len(x) != len(y):
        raise Misalignment(f"series lengths differ ({len(x)} vs {len(y)})")
    pts = np.column_stack([x, y])
    if k is None:
        ks = [kk for kk in k_range if kk <= len(pts)]
        k = elbow_select(pts, ks, seed)
    res = kmeans(pts, k, seed)

    clusters = []
    best = None
    for j in range(k):
        members = np.flatnonzero(res.assignments == j)
        high = members[y[members] > threshold]
        gap = int(np.diff(high).max()) if high.size > 1 else (0 if high.size else None)
        frac = float(high.size / members.size) if members.size else 0.0
        qualifies = high.size > 0 and gap <= gap_tolerance
        clusters.append({"cluster_id": j, "size": int(members.size), "n_high": int(high.size),
                         "fraction_high": frac, "max_gap": gap, "qualifies": bool(qualifies)})
        if qualifies and (best is None or frac > best["fraction_high"]):
            best = clusters[-1]

    if best is None:
        return EwsVerdict("none", None, 0.0, None, 0, k, clusters)
    kind = "strong" if best["fraction_high"] > strong_threshold else "weak"
    return EwsVerdict(kind, best["cluster_id"], best["fraction_high"], best["max_gap"],
                      best["n_high"], k, clusters)


@dataclass(frozen=True, eq=False)
class EwsResult:
    dates: np.ndarray
    log_price: np.ndarray
    norm_l1: np.ndarray
    c1: np.ndarray
    verdict: EwsVerdict


def early_warning(prices, d=4, tau=1, w=50, k=None, seed=DEFAULT_SEED, gap_tolerance=5,
                  strong_threshold=0.5, k_range=range(1, 9)) -> EwsResult:
    """Full early-warning run on one price series.

    Log returns are delay-embedded, each ``w``-point cloud gives an H1
    landscape and its L1 norm, the C1 quantity is formed from consecutive
    norms, and (log price, C1), both scaled to [0, 1], go to
    :func:`detect_ews`.
    """
    r = log_returns(prices)
    norms = window_norms(r, d=d, tau=tau, w=w, p=1, dim=1)
    if len(norms) < 2:
        raise SeriesTooShort(len(prices), tau * (d - 1) + w + 2, "price series")
    c1 = c1_series(norms.values)
    dates = norms.dates[1:]
    logp = np.log(prices.closes[np.isin(prices.dates, dates)])
    verdict = detect_ews(minmax_scale(logp), minmax_scale(c1), k=k, seed=seed,
                         gap_tolerance=gap_tolerance, strong_threshold=strong_threshold,
                         k_range=k_range)
    return EwsResult(dates, logp, norms.values[1:], c1, verdict)
