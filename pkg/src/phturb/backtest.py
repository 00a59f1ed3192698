"""Quintile-driven exposure strategies and their performance measures.

Each month the strategy looks at where the latest monthly index value sits
among the trailing ``lookback`` values and invests a fixed percentage of
equity accordingly. Returns are simple monthly returns; no costs, no
borrowing rate for leveraged exposure.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._io import csv_text, fmt_float
from .exceptions import (
    BadLookback,
    BadQuintile,
    InsufficientHistory,
    Misalignment,
    TooShort,
)

__all__ = [
    "KINDS",
    "EXPOSURE_TABLE",
    "StrategySpec",
    "StrategyResult",
    "Performance",
    "quintile_of",
    "exposure",
    "run_strategy",
    "max_drawdown",
    "performance",
    "monthly_last",
    "monthly_returns",
    "align_monthly",
    "report_csv",
    "equity_csv",
]

KINDS = ("protection", "flexible", "leverage", "buy_and_hold")

EXPOSURE_TABLE = {
    "protection": (100, 100, 100, 100, 0),
    "flexible": tuple(100 - 20 * (n - 1) for n in range(1, 6)),
    "leverage": tuple(120 - 5 * n * (n - 1) for n in range(1, 6)),
    "buy_and_hold": (100, 100, 100, 100, 100),
}


@dataclass(frozen=True)
class StrategySpec:
    kind: str = "buy_and_hold"
    lookback: int = 60

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}; expected one of {KINDS}")
        if not isinstance(self.lookback, (int, np.integer)) or self.lookback < 5:
            raise BadLookback(f"lookback must be an integer >= 5, got {self.lookback!r}")


@dataclass(frozen=True, eq=False)
class StrategyResult:
    """Outcome of one backtest.

    ``exposures`` are percentages per traded month, ``returns`` the
    strategy's monthly returns and ``equity`` the curve starting at 1.0
    (one entry longer than ``returns``).
    """

    spec: StrategySpec
    exposures: np.ndarray
    returns: np.ndarray
    equity: np.ndarray
    dates: np.ndarray | None = None


@dataclass(frozen=True)
class Performance:
    mu: float
    sigma: float
    sr: float
    max_dd: float

    def as_tuple(self):
        return (self.mu, self.sigma, self.sr, self.max_dd)


def quintile_of(history, latest, lookback=None) -> int:
    """Quintile (1..5) of ``latest`` among ``history``.

    Percentiles use linear interpolation between order statistics.
    ``latest <= P20`` gives 1 and ``latest > P80`` gives 5.

    Examples
    --------
    >>> quintile_of(np.arange(1, 61), 30.5)
    3
    """
    h = np.asarray(history, dtype=float)
    if h.ndim != 1 or h.size < 5 or (lookback is not None and h.size != lookback):
        raise BadLookback(f"history of length {h.size} does not match lookback {lookback}")
    cuts = np.percentile(h, [20, 40, 60, 80], method="linear")
    return int(np.searchsorted(cuts, float(latest), side="left")) + 1


def exposure(kind: str, n: int) -> int:
    """Percent of equity invested by strategy ``kind`` in quintile ``n``."""
    if kind not in EXPOSURE_TABLE:
        raise ValueError(f"unknown strategy kind {kind!r}")
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or not 1 <= n <= 5:
        raise BadQuintile(f"quintile must be in 1..5, got {n!r}")
    return EXPOSURE_TABLE[kind][n - 1]


def run_strategy(monthly_returns, index_monthly, spec: StrategySpec, dates=None) -> StrategyResult:
    """Backtest ``spec`` over aligned monthly returns and index values.

    ``index_monthly[m]`` is the index value observed at the end of month
    ``m`` and ``monthly_returns[m]`` the asset return over month ``m``.
    Month ``m`` is traded from the ``lookback`` index values ending at month
    ``m - 1``, so the first traded month is ``lookback``. ``buy_and_hold``
    may be run without an index, in which case every month is traded.
    """
    r = np.asarray(monthly_returns, dtype=float)
    if r.ndim != 1:
        raise Misalignment("monthly returns must be one-dimensional")
    if dates is not None and len(dates) != len(r):
        raise Misalignment(f"{len(dates)} dates for {len(r)} returns")

    if index_monthly is None:
        if spec.kind != "buy_and_hold":
            raise InsufficientHistory(f"strategy {spec.kind!r} needs an index series")
        start = 0
        expo = np.full(len(r), 100.0)
    else:
        idx = np.asarray(index_monthly, dtype=float)
        if idx.shape != r.shape:
            raise Misalignment(f"{idx.size} index values for {r.size} monthly returns")
        start = spec.lookback
        if len(r) <= start:
            raise InsufficientHistory(
                f"{len(r)} months leave nothing to trade after a {spec.lookback}-month lookback"
            )
        table = EXPOSURE_TABLE[spec.kind]
        expo = np.array([
            table[quintile_of(idx[m - spec.lookback:m], idx[m - 1]) - 1]
            for m in range(start, len(r))
        ], dtype=float)

    traded = r[start:]
    strat = expo / 100.0 * traded
    equity = np.concatenate([[1.0], np.cumprod(1.0 + strat)])
    out_dates = None if dates is None else np.asarray(dates)[start:]
    return StrategyResult(spec, expo, strat, equity, out_dates)


def max_drawdown(equity) -> float:
    """Largest drop from the running peak, in percent.

    >>> max_drawdown([100, 120, 60, 130])
    50.0
    """
    e = np.asarray(equity, dtype=float)
    if e.size == 0:
        return 0.0
    peak = np.maximum.accumulate(e)
    dd = np.where(peak > 0, (peak - e) / np.where(peak > 0, peak, 1.0), 0.0)
    return float(dd.max() * 100.0)


def performance(result) -> Performance:
    """Annualized mean and volatility (percent), their ratio and max drawdown.

    Mean is arithmetic (x12), volatility is the sample standard deviation
    scaled by sqrt(12). No risk-free rate is subtracted.
    """
    r = result.returns if isinstance(result, StrategyResult) else np.asarray(result, dtype=float)
    if r.size < 12:
        raise TooShort(f"performance needs at least 12 monthly returns, got {r.size}")
    mu = 12.0 * float(np.mean(r)) * 100.0
    sigma = math.sqrt(12.0) * float(np.std(r, ddof=1)) * 100.0
    sr = mu / sigma if sigma > 0 else math.nan
    equity = result.equity if isinstance(result, StrategyResult) else np.concatenate([[1.0], np.cumprod(1.0 + r)])
    return Performance(mu, sigma, sr, max_drawdown(equity))


def monthly_last(dates, values):
    """Last observation of each calendar month.

    Returns ``(months, values)`` with ``months`` as ``datetime64[M]``.
    """
    d = np.asarray(dates, dtype="datetime64[D]")
    v = np.asarray(values, dtype=float)
    if d.shape != v.shape:
        raise Misalignment(f"{d.size} dates for {v.size} values")
    if d.size == 0:
        return d.astype("datetime64[M]"), v
    order = np.argsort(d, kind="stable")
    d, v = d[order], v[order]
    months = d.astype("datetime64[M]")
    last = np.flatnonzero(np.append(months[1:] != months[:-1], True))
    return months[last], v[last]


def monthly_returns(dates, closes):
    """Simple month-over-month returns from month-end closes, dated by month."""
    months, last = monthly_last(dates, closes)
    if last.size < 2:
        raise TooShort("need closes spanning at least two months")
    return months[1:], last[1:] / last[:-1] - 1.0


def align_monthly(ret_months, returns, idx_months, index):
    """Restrict an index to the return months, requiring full coverage.

    Raises :class:`Misalignment` if any return month has no index value.
    """
    ret_months = np.asarray(ret_months, dtype="datetime64[M]")
    idx_months = np.asarray(idx_months, dtype="datetime64[M]")
    pos = np.searchsorted(idx_months, ret_months)
    ok = (pos < idx_months.size) & (idx_months[np.minimum(pos, idx_months.size - 1)] == ret_months)
    if not ok.all():
        first = ret_months[np.flatnonzero(~ok)[0]]
        raise Misalignment(f"index has no value for month {first}")
    return np.asarray(returns, dtype=float), np.asarray(index, dtype=float)[pos]


def report_csv(results: dict) -> str:
    """Table with rows ``mu, sigma, SR, maxDD`` and one column per strategy."""
    names = list(results)
    perfs = [results[n] if isinstance(results[n], Performance) else performance(results[n]) for n in names]
    rows = []
    for key, attr in (("mu", "mu"), ("sigma", "sigma"), ("SR", "sr"), ("maxDD", "max_dd")):
        rows.append([key] + [fmt_float(getattr(p, attr)) for p in perfs])
    return csv_text(["measure"] + names, rows)


def equity_csv(result: StrategyResult) -> str:
    """CSV ``month,exposure,return,equity``; equity after the month, from 1.0."""
    n = result.returns.size
    months = result.dates if result.dates is not None else np.arange(1, n + 1)
    rows = [
        (str(m), fmt_float(e), fmt_float(r), fmt_float(q))
        for m, e, r, q in zip(months, result.exposures, result.returns, result.equity[1:])
    ]
    return csv_text(["month", "exposure", "return", "equity"], rows)

