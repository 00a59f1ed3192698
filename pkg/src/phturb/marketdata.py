"""Price CSV ingestion and return series.

Dates are ``numpy.datetime64[D]`` arrays throughout the package; values are
float arrays of the same length.
"""

import csv
import io
import math
import re
from dataclasses import dataclass, field

import numpy as np

from ._io import csv_text, fmt_float
from .exceptions import (
    DateMisalignment,
    DuplicateDate,
    EmptyInput,
    MalformedRow,
    MissingValue,
    NonPositivePrice,
    TooShort,
)

__all__ = [
    "PriceSeries",
    "ReturnSeries",
    "parse_price_csv",
    "read_price_csv",
    "log_returns",
    "simple_returns",
    "inner_join",
    "returns_to_csv",
    "read_series_csv",
    "read_returns_csv",
]

_ISO_DATE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_MISSING = {"", "nan", "na", "n/a", "null", "none"}


def _as_dates(dates):
    return np.asarray(dates, dtype="datetime64[D]")


@dataclass(frozen=True)
class PriceSeries:
    asset_id: str
    dates: np.ndarray
    closes: np.ndarray

    def __post_init__(self):
        dates = _as_dates(self.dates)
        closes = np.asarray(self.closes, dtype=float)
        if dates.shape != closes.shape or dates.ndim != 1:
            raise ValueError("dates and closes must be 1-D arrays of equal length")
        if len(closes) < 2:
            raise TooShort(f"price series {self.asset_id!r} needs at least 2 observations")
        if np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise ValueError("dates must be strictly increasing")
        if not np.all(closes > 0):
            raise NonPositivePrice(f"price series {self.asset_id!r} has non-positive closes")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "closes", closes)

    def __len__(self):
        return len(self.closes)

    def scaled(self, factor: float) -> "PriceSeries":
        return PriceSeries(self.asset_id, self.dates, self.closes * factor)


@dataclass(frozen=True)
class ReturnSeries:
    asset_id: str
    dates: np.ndarray
    values: np.ndarray
    kind: str = field(default="log")

    def __post_init__(self):
        dates = _as_dates(self.dates)
        values = np.asarray(self.values, dtype=float)
        if dates.shape != values.shape or dates.ndim != 1:
            raise ValueError("dates and values must be 1-D arrays of equal length")
        if len(dates) > 1 and np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise ValueError("dates must be strictly increasing")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    @classmethod
    def from_values(cls, values, start="2000-01-03", asset_id="x", kind="log"):
        """Wrap a bare array with consecutive business-day dates (synthetic data, tests)."""
        values = np.asarray(values, dtype=float)
        dates = np.busday_offset(np.datetime64(start, "D"), np.arange(len(values)), roll="forward")
        return cls(asset_id, dates, values, kind)


def parse_price_csv(raw, schema=None, asset_id=None, forward_fill=False) -> PriceSeries:
    """Parse a price CSV into a :class:`PriceSeries`.

    Parameters
    ----------
    raw : bytes, str or binary/text file object
        UTF-8 text with a header row.
    schema : dict, optional
        Column mapping ``{"date": <name>, "close": <name>}``; defaults to
        ``date`` and ``close``.
    asset_id : str, optional
        Label for the series; defaults to the close column name.
    forward_fill : bool
        Fill missing closes from the previous row instead of failing.

    Rows may arrive in any order; they are sorted by date. Dates must be
    ``YYYY-MM-DD``.
    """
    schema = {"date": "date", "close": "close", **(schema or {})}
    if hasattr(raw, "read"):
        raw = raw.read()
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise MalformedRow(1, f"input is not UTF-8 ({exc.reason})") from None
    if not raw.strip():
        raise EmptyInput("price input is empty")

    reader = csv.reader(io.StringIO(raw))
    header = [h.strip() for h in next(reader)]
    try:
        i_date = header.index(schema["date"])
        i_close = header.index(schema["close"])
    except ValueError:
        raise MalformedRow(1, f"header {header} lacks columns {schema['date']!r}/{schema['close']!r}") from None

    rows = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) <= max(i_date, i_close):
            raise MalformedRow(line_no, f"expected at least {max(i_date, i_close) + 1} fields")
        date_s, close_s = row[i_date].strip(), row[i_close].strip()
        if not _ISO_DATE.match(date_s):
            raise MalformedRow(line_no, f"date {date_s!r} is not YYYY-MM-DD")
        try:
            date = np.datetime64(date_s, "D")
        except ValueError:
            raise MalformedRow(line_no, f"invalid date {date_s!r}") from None
        if close_s.lower() in _MISSING:
            close = math.nan
        else:
            try:
                close = float(close_s)
            except ValueError:
                raise MalformedRow(line_no, f"close {close_s!r} is not a number") from None
            if math.isinf(close):
                raise MalformedRow(line_no, f"close {close_s!r} is not finite")
        if not math.isnan(close) and close <= 0:
            raise NonPositivePrice(f"line {line_no}: close {close_s} is not positive")
        rows.append((date, close, line_no))

    if not rows:
        raise EmptyInput("price input has a header but no data rows")

    rows.sort(key=lambda r: r[0])
    dates = np.array([r[0] for r in rows], dtype="datetime64[D]")
    dup = np.flatnonzero(dates[1:] == dates[:-1])
    if dup.size:
        raise DuplicateDate(f"duplicate date {dates[dup[0]]}")

    closes = np.array([r[1] for r in rows], dtype=float)
    missing = np.isnan(closes)
    if missing.any():
        if not forward_fill:
            first = rows[int(np.flatnonzero(missing)[0])][2]
            raise MissingValue(f"line {first}: missing close (use forward fill to fill gaps)")
        if missing[0]:
            raise MissingValue(f"line {rows[0][2]}: first close is missing; nothing to fill from")
        idx = np.where(missing, 0, np.arange(len(closes)))
        np.maximum.accumulate(idx, out=idx)
        closes = closes[idx]

    return PriceSeries(asset_id or schema["close"], dates, closes)


def read_price_csv(path, schema=None, asset_id=None, forward_fill=False) -> PriceSeries:
    with open(path, "rb") as fh:
        raw = fh.read()
    return parse_price_csv(raw, schema, asset_id=asset_id, forward_fill=forward_fill)


def log_returns(p: PriceSeries) -> ReturnSeries:
    """``r[i] = ln(close[i+1] / close[i])``, dated by the later day."""
    if len(p) < 2:
        raise TooShort("need at least 2 prices for a return")
    values = np.diff(np.log(p.closes))
    return ReturnSeries(p.asset_id, p.dates[1:], values, "log")


def simple_returns(p: PriceSeries) -> ReturnSeries:
    if len(p) < 2:
        raise TooShort("need at least 2 prices for a return")
    values = p.closes[1:] / p.closes[:-1] - 1.0
    return ReturnSeries(p.asset_id, p.dates[1:], values, "simple")


def inner_join(series):
    """Restrict every series to the dates common to all of them.

    Works on both :class:`PriceSeries` and :class:`ReturnSeries`.
    """
    series = list(series)
    if not series:
        raise EmptyInput("nothing to join")
    common = series[0].dates
    for s in series[1:]:
        common = np.intersect1d(common, s.dates)
    if common.size == 0:
        raise DateMisalignment(None, "series share no dates")
    out = []
    for s in series:
        mask = np.isin(s.dates, common)
        if isinstance(s, PriceSeries):
            out.append(PriceSeries(s.asset_id, s.dates[mask], s.closes[mask]))
        else:
            out.append(ReturnSeries(s.asset_id, s.dates[mask], s.values[mask], s.kind))
    return out


def check_aligned(series):
    """Raise :class:`DateMisalignment` unless all series share one date axis."""
    ref = series[0].dates
    for s in series[1:]:
        if len(s.dates) != len(ref) or not np.array_equal(s.dates, ref):
            n = min(len(s.dates), len(ref))
            diff = np.flatnonzero(s.dates[:n] != ref[:n])
            first = ref[diff[0]] if diff.size else (ref[n] if len(ref) > n else s.dates[n])
            raise DateMisalignment(first, f"series {s.asset_id!r} differs from "
                                          f"{series[0].asset_id!r} first at {first}")
    return ref


def returns_to_csv(series) -> str:
    """Wide CSV ``date,<asset_1>,...`` for aligned series."""
    dates = check_aligned(series)
    header = ["date"] + [s.asset_id for s in series]
    rows = ([str(d)] + [fmt_float(s.values[i]) for s in series] for i, d in enumerate(dates))
    return csv_text(header, rows)


def read_series_csv(path, value_column=None):
    """Read a dated numeric CSV (``date,value`` or wide) into (dates, values).

    ``value_column`` defaults to the first non-date column.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        col = header.index(value_column) if value_column else 1
        dates, values = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                dates.append(np.datetime64(row[0].strip(), "D"))
                values.append(float(row[col]))
            except (ValueError, IndexError):
                raise MalformedRow(line_no, f"cannot parse {row!r}") from None
    if not dates:
        raise EmptyInput(f"{path} has no data rows")
    return np.array(dates, dtype="datetime64[D]"), np.array(values, dtype=float)


def read_returns_csv(path, columns=None, kind="log"):
    """Read a wide returns CSV (as written by :func:`returns_to_csv`).

    Returns one :class:`ReturnSeries` per selected column, all sharing the
    file's date axis.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyInput(f"{path} is empty") from None
        names = list(columns) if columns else header[1:]
        missing = [c for c in names if c not in header[1:]]
        if missing or not names:
            raise MalformedRow(1, f"header {header} lacks columns {missing or names}")
        cols = [header.index(c) for c in names]
        dates, rows = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                dates.append(np.datetime64(row[0].strip(), "D"))
                rows.append([float(row[c]) for c in cols])
            except (ValueError, IndexError):
                raise MalformedRow(line_no, f"cannot parse {row!r}") from None
    if not dates:
        raise EmptyInput(f"{path} has no data rows")
    dates = np.array(dates, dtype="datetime64[D]")
    values = np.array(rows, dtype=float)
    return [ReturnSeries(name, dates, values[:, j], kind) for j, name in enumerate(names)]
