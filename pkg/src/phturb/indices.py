"""Turbulence-index pipelines built on the topology primitives.

* :func:`turbulence_index` -- L2 distance between the landscapes of delay
  clouds ``T`` windows apart, for one configuration ``(d, tau, w, T, dim)``;
  :func:`turbulence_grid` runs many configurations sharing the work.
* :func:`phti` -- Wasserstein distance between consecutive multi-asset
  window diagrams, plus its trailing moving average.
* :func:`correlation_graph_index` -- Wasserstein distance between the
  diagram of a rolling correlation graph and the one at a reference time.
* :func:`landscape_norm_index` -- L^p norm of the H1 landscape of each
  multi-asset window; :func:`moving_variance` smooths it.
"""

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._io import csv_text, fmt_float
from ._validation import check_positive_int, check_series
from .diagmetrics import wasserstein
from .embedding import EmbeddingConfig, _cloud_array, multiasset_array
from .exceptions import SeriesTooShort, TooShort, ZeroVariance
from .landscape import landscape_distance, landscape_from_diagram, lp_norm
from .marketdata import ReturnSeries, check_aligned
from .persistence import rips_persistence

__all__ = [
    "IndexConfig",
    "IndexSeries",
    "DEFAULT_GRID",
    "default_grid",
    "turbulence_index",
    "turbulence_grid",
    "window_norms",
    "phti",
    "CorrelationGraph",
    "correlation_graph",
    "correlation_graph_index",
    "landscape_norm_index",
    "moving_variance",
    "TurbulenceIndex",
]

DEFAULT_GRID = {
    "d": (3, 4, 5, 10),
    "tau": (1, 2, 5),
    "w": (30, 60),
    "T": (1, 5, 15, 30, 60),
    "dim": (0, 1),
}

POLICIES = ("drop-essential", "cap")


@dataclass(frozen=True, order=True)
class IndexConfig:
    d: int
    tau: int
    w: int
    T: int
    dim: int
    policy: str = field(default="drop-essential", compare=True)
    max_scale: float | None = field(default=None, compare=False)

    def __post_init__(self):
        EmbeddingConfig(self.d, self.tau, self.w)
        check_positive_int(self.T, "T")
        if self.dim not in (0, 1):
            raise ValueError(f"dim must be 0 or 1, got {self.dim}")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")

    @property
    def label(self) -> str:
        return f"d{self.d}_tau{self.tau}_w{self.w}_T{self.T}_dim{self.dim}"

    @property
    def filename(self) -> str:
        return f"idx_{self.label}.csv"

    @property
    def min_length(self) -> int:
        """Shortest return series that yields at least one index value."""
        return self.tau * (self.d - 1) + self.w + self.T

    @classmethod
    def from_label(cls, label: str, **kw):
        parts = dict(
            (k, int(v)) for k, v in (
                (p.rstrip("0123456789"), p[len(p.rstrip("0123456789")):])
                for p in label.removeprefix("idx_").removesuffix(".csv").split("_")
            )
        )
        return cls(parts["d"], parts["tau"], parts["w"], parts["T"], parts["dim"], **kw)


def default_grid(**overrides) -> list[IndexConfig]:
    """All combinations of the default parameter grid (240 configs)."""
    grid = {**DEFAULT_GRID, **overrides}
    return [IndexConfig(*combo) for combo in itertools.product(
        grid["d"], grid["tau"], grid["w"], grid["T"], grid["dim"])]


@dataclass(frozen=True, eq=False)
class IndexSeries:
    name: str
    dates: np.ndarray
    values: np.ndarray
    config: object = None

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.asarray(self.values, dtype=float)
        if dates.shape != values.shape:
            raise ValueError("dates and values must have equal length")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def to_csv(self) -> str:
        return csv_text(["date", "value"], ((str(d), fmt_float(v)) for d, v in zip(self.dates, self.values)))


# -- turbulence index -----------------------------------------------------------

def _landscapes_for(values, d, tau, w, dims, policy, max_scale):
    """Per-window landscapes for every dimension in ``dims``."""
    clouds = _cloud_array(values, d, tau, w)
    out = {k: [] for k in dims}
    for cloud in clouds:
        dgms = rips_persistence(cloud, dims, max_scale=max_scale)
        cap = None
        if policy == "cap":
            cap = _diameter(cloud) if max_scale is None else max_scale
        for k in dims:
            out[k].append(landscape_from_diagram(dgms[k], policy, cap))
    return out


def _diameter(cloud):
    diff = cloud[:, None, :] - cloud[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


def _distances(lands, T):
    return np.array([landscape_distance(lands[t - T], lands[t], 2) for t in range(T, len(lands))])


def _anchor_dates(x: ReturnSeries, d, tau, w, T):
    first = tau * (d - 1) + w - 1 + T
    return x.dates[first:]


def turbulence_index(x: ReturnSeries, config: IndexConfig) -> IndexSeries:
    """``M_t = ||lambda_{t-T} - lambda_t||_2`` over delay clouds of ``x``.

    Value ``t`` is dated by the last observation of cloud ``t``; the first
    value needs ``config.min_length`` observations.
    """
    values = check_series(x.values, "returns")
    if len(values) < config.min_length:
        raise SeriesTooShort(len(values), config.min_length, f"series for {config.label}")
    lands = _landscapes_for(values, config.d, config.tau, config.w, (config.dim,),
                            config.policy, config.max_scale)[config.dim]
    return IndexSeries(config.label, _anchor_dates(x, config.d, config.tau, config.w, config.T),
                       _distances(lands, config.T), config)


def _grid_group(values, key, configs):
    d, tau, w, policy, max_scale = key
    dims = tuple(sorted({c.dim for c in configs}))
    lands = _landscapes_for(values, d, tau, w, dims, policy, max_scale)
    return [_distances(lands[c.dim], c.T) for c in configs]


def turbulence_grid(x: ReturnSeries, configs, jobs: int = 1, progress=None) -> dict:
    """Run many configurations, computing each window's diagrams once.

    Configurations sharing ``(d, tau, w)`` share clouds, diagrams and
    landscapes. Groups may run in ``jobs`` worker processes; the result is
    identical for any ``jobs``.

    Returns
    -------
    dict mapping each IndexConfig to its IndexSeries, in input order.
    """
    configs = list(configs)
    values = check_series(x.values, "returns")
    for c in configs:
        if len(values) < c.min_length:
            raise SeriesTooShort(len(values), c.min_length, f"series for {c.label}")
    groups = {}
    for c in configs:
        groups.setdefault((c.d, c.tau, c.w, c.policy, c.max_scale), []).append(c)

    results = {}
    keys = list(groups)
    if jobs > 1 and len(keys) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_grid_group, values, k, groups[k]) for k in keys]
            outputs = [f.result() for f in futures]
    else:
        outputs = []
        for k in keys:
            outputs.append(_grid_group(values, k, groups[k]))
            if progress is not None:
                progress(k)
    for k, vals in zip(keys, outputs):
        for c, v in zip(groups[k], vals):
            results[c] = IndexSeries(c.label, _anchor_dates(x, c.d, c.tau, c.w, c.T), v, c)
    return {c: results[c] for c in configs}


def window_norms(x: ReturnSeries, d=4, tau=1, w=50, p=1, dim=1) -> IndexSeries:
    """L^p norm of the landscape of every delay cloud of ``x``."""
    values = check_series(x.values, "returns")
    lands = _landscapes_for(values, d, tau, w, (dim,), "drop-essential", None)[dim]
    norms = np.array([lp_norm(lam, p) for lam in lands])
    return IndexSeries(f"norm_L{p}_d{d}_tau{tau}_w{w}_dim{dim}", x.dates[tau * (d - 1) + w - 1:], norms)


# -- PHTI -------------------------------------------------------------------------

def phti(portfolio_returns, p_wasserstein=1, dim=1, window=60, smoothing=60, max_scale=None):
    """Raw and smoothed persistent-homology turbulence index.

    Each day's cloud holds the last ``window`` daily return vectors of the
    portfolios. ``raw[t]`` is the Wasserstein distance between the diagrams of
    clouds ``t`` and ``t-1``; ``smoothed[t]`` averages the last ``smoothing``
    raw values.

    Returns
    -------
    (raw, smoothed) : tuple of IndexSeries
    """
    series = list(portfolio_returns)
    dates = check_aligned(series)
    need = window + smoothing
    if len(dates) < need:
        raise TooShort(f"PHTI needs at least {need} observations, got {len(dates)}")
    clouds, anchors = multiasset_array(series, window)
    dgms = [rips_persistence(c, (dim,), max_scale=max_scale)[dim] for c in clouds]
    raw = np.array([wasserstein(dgms[t - 1], dgms[t], p_wasserstein) for t in range(1, len(dgms))])
    smooth = np.convolve(raw, np.full(smoothing, 1.0 / smoothing), mode="valid")
    tag = f"N{len(series)}_dim{dim}"
    return (
        IndexSeries(f"phti_raw_{tag}", anchors[1:], raw),
        IndexSeries(f"phti_{tag}", anchors[smoothing:], smooth),
    )


# -- correlation graphs -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CorrelationGraph:
    date: np.datetime64
    labels: tuple
    weights: np.ndarray


def correlation_graph(returns, t: int, window: int = 15) -> CorrelationGraph:
    """Edge weights ``sqrt(2 (1 - c_ij))`` from Pearson correlations.

    The correlation at position ``t`` uses observations ``t - window``
    through ``t`` inclusive.
    """
    series = list(returns)
    if len(series) < 2:
        raise ValueError("a correlation graph needs at least 2 assets")
    dates = check_aligned(series)
    window = check_positive_int(window, "window")
    if not (window <= t < len(dates)):
        raise TooShort(f"position {t} leaves no room for a window of {window} (series length {len(dates)})")
    block = np.column_stack([s.values[t - window: t + 1] for s in series])
    centred = block - block.mean(axis=0)
    norms = np.sqrt((centred**2).sum(axis=0))
    flat = np.flatnonzero(norms == 0)
    if flat.size:
        raise ZeroVariance(f"asset {series[flat[0]].asset_id!r} is constant over the window ending {dates[t]}")
    corr = (centred.T @ centred) / np.outer(norms, norms)
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    weights = np.sqrt(2.0 * (1.0 - corr))
    np.fill_diagonal(weights, 0.0)
    return CorrelationGraph(dates[t], tuple(s.asset_id for s in series), weights)


def correlation_graph_index(returns, t0=None, dim=0, p_wasserstein=1, window=15) -> IndexSeries:
    """Wasserstein distance from the diagram at ``t0`` to the one at each later ``t``.

    ``t0`` defaults to the first position with a full window.
    """
    series = list(returns)
    dates = check_aligned(series)
    t0 = window if t0 is None else int(t0)
    if not (window <= t0 < len(dates)):
        raise TooShort(f"t0={t0} must lie in [{window}, {len(dates)})")

    def diagram(t):
        g = correlation_graph(series, t, window)
        return rips_persistence(g.weights, (dim,), metric="precomputed")[dim]

    ref = diagram(t0)
    vals = [0.0] + [wasserstein(ref, diagram(t), p_wasserstein) for t in range(t0 + 1, len(dates))]
    return IndexSeries(f"corr_dim{dim}", dates[t0:], np.array(vals))


# -- landscape norms ----------------------------------------------------------------

def landscape_norm_index(returns, w: int, p: int = 1, dim: int = 1, max_scale=None) -> IndexSeries:
    """L^p norm of the H1 landscape of each ``w``-day multi-asset cloud."""
    series = list(returns)
    clouds, anchors = multiasset_array(series, w)
    vals = []
    for c in clouds:
        dgm = rips_persistence(c, (dim,), max_scale=max_scale)[dim]
        vals.append(lp_norm(landscape_from_diagram(dgm, "drop-essential"), p))
    return IndexSeries(f"lnorm_L{p}_w{w}", anchors, np.array(vals))


def moving_variance(s, window: int = 500) -> IndexSeries:
    """Trailing sample variance (denominator ``window - 1``)."""
    window = check_positive_int(window, "window", minimum=2)
    vals = s.values if hasattr(s, "values") else np.asarray(s, dtype=float)
    if len(vals) < window:
        raise TooShort(f"series of length {len(vals)} is shorter than the window {window}")
    view = np.lib.stride_tricks.sliding_window_view(np.asarray(vals, dtype=float), window)
    var = view.var(axis=1, ddof=1)
    dates = s.dates[window - 1:] if hasattr(s, "dates") else np.arange(window - 1, len(vals)).astype("datetime64[D]")
    return IndexSeries(f"{getattr(s, 'name', 'series')}_mvar{window}", dates, var)


class TurbulenceIndex(TransformerMixin, BaseEstimator):
    """Scikit-learn wrapper: 1-D return array -> turbulence index values.

    Parameters
    ----------
    d, tau, w : int
        Delay embedding and window size.
    T : int
        Lag, in windows, between the compared landscapes.
    dim : {0, 1}
        Homology dimension.
    policy : {"drop-essential", "cap"}
        Treatment of infinite H0 pairs.
    """

    def __init__(self, d=4, tau=2, w=60, T=5, dim=0, policy="drop-essential", max_scale=None):
        self.d = d
        self.tau = tau
        self.w = w
        self.T = T
        self.dim = dim
        self.policy = policy
        self.max_scale = max_scale

    def _config(self):
        return IndexConfig(self.d, self.tau, self.w, self.T, self.dim, self.policy, self.max_scale)

    def fit(self, X, y=None):
        self.config_ = self._config()
        check_series(X, "X", min_length=self.config_.min_length)
        return self

    def transform(self, X):
        cfg = self._config()
        x = ReturnSeries.from_values(check_series(X, "X"))
        return turbulence_index(x, cfg).values
