"""Delay embedding and sliding point clouds."""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_positive_int, check_series
from .exceptions import SeriesTooShort, TooFewPoints
from .marketdata import ReturnSeries, check_aligned

__all__ = [
    "EmbeddingConfig",
    "PointCloud",
    "takens_embed",
    "sliding_clouds",
    "delay_clouds",
    "multiasset_clouds",
    "TakensEmbedding",
]


@dataclass(frozen=True)
class EmbeddingConfig:
    d: int
    tau: int
    w: int

    def __post_init__(self):
        check_positive_int(self.d, "d")
        check_positive_int(self.tau, "tau")
        check_positive_int(self.w, "w", minimum=2)

    @property
    def lead(self) -> int:
        """Observations consumed before the first cloud is complete."""
        return self.tau * (self.d - 1) + self.w - 1


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    anchor_date: np.datetime64 | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError(f"points must be 2-D, got shape {pts.shape}")
        if pts.shape[0] < 2:
            raise TooFewPoints("a point cloud needs at least 2 points")
        object.__setattr__(self, "points", pts)

    @property
    def w(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


def takens_embed(x, d: int, tau: int) -> np.ndarray:
    """Delay-coordinate embedding of a scalar series.

    Row ``t`` of the result is ``(x[t], x[t+tau], ..., x[t+tau*(d-1)])``.

    Parameters
    ----------
    x : array-like or ReturnSeries
    d, tau : int
        Embedding dimension and delay.

    Returns
    -------
    ndarray of shape (len(x) - tau*(d-1), d)
    """
    d = check_positive_int(d, "d")
    tau = check_positive_int(tau, "tau")
    x = check_series(x)
    span = tau * (d - 1)
    if len(x) < span + 1:
        raise SeriesTooShort(len(x), span + 1)
    n = len(x) - span
    idx = np.arange(n)[:, None] + tau * np.arange(d)[None, :]
    return x[idx]


def sliding_clouds(points, w: int, point_dates=None) -> list[PointCloud]:
    """Overlapping windows of ``w`` consecutive points.

    ``point_dates[i]`` is the date attached to point ``i``; each cloud is
    anchored at the date of its last point.
    """
    w = check_positive_int(w, "w", minimum=2)
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[0] < w:
        raise TooFewPoints(f"{points.shape[0]} points cannot fill a window of {w}")
    windows = sliding_window_view(points, w, axis=0).transpose(0, 2, 1)
    anchors = [None] * len(windows) if point_dates is None else np.asarray(point_dates)[w - 1:]
    return [PointCloud(win, a) for win, a in zip(windows, anchors)]


def _cloud_array(x, d, tau, w):
    """All delay clouds as one (n_clouds, w, d) view; no dates."""
    pts = takens_embed(x, d, tau)
    if pts.shape[0] < w:
        raise SeriesTooShort(len(x), tau * (d - 1) + w)
    return sliding_window_view(pts, w, axis=0).transpose(0, 2, 1)


def delay_clouds(x: ReturnSeries, d: int, tau: int, w: int) -> list[PointCloud]:
    """Embed, then window; clouds carry the date of their last observation."""
    cfg = EmbeddingConfig(d, tau, w)
    if len(x) < cfg.lead + 1:
        raise SeriesTooShort(len(x), cfg.lead + 1)
    pts = takens_embed(x.values, d, tau)
    return sliding_clouds(pts, w, x.dates[tau * (d - 1):])


def multiasset_clouds(series, w: int) -> list[PointCloud]:
    """Stack ``k`` aligned return series into clouds of ``w`` points in R^k."""
    series = list(series)
    if len(series) < 2:
        raise ValueError("multi-asset clouds need at least 2 series")
    dates = check_aligned(series)
    stacked = np.column_stack([s.values for s in series])
    return sliding_clouds(stacked, w, dates)


def multiasset_array(series, w):
    series = list(series)
    if len(series) < 2:
        raise ValueError("multi-asset clouds need at least 2 series")
    dates = check_aligned(series)
    stacked = np.column_stack([s.values for s in series])
    if stacked.shape[0] < w:
        raise TooFewPoints(f"{stacked.shape[0]} observations cannot fill a window of {w}")
    return sliding_window_view(stacked, w, axis=0).transpose(0, 2, 1), dates[w - 1:]


class TakensEmbedding(TransformerMixin, BaseEstimator):
    """Scalar series -> stack of delay-embedded sliding clouds.

    ``transform`` returns an array of shape (n_clouds, w, d), ready for
    :class:`phturb.persistence.VietorisRipsPersistence`.
    """

    def __init__(self, d=4, tau=1, w=50):
        self.d = d
        self.tau = tau
        self.w = w

    def fit(self, X, y=None):
        EmbeddingConfig(self.d, self.tau, self.w)
        check_series(X, "X")
        return self

    def transform(self, X):
        return np.ascontiguousarray(_cloud_array(X, self.d, self.tau, self.w))
