"""Command-line front end: ``phturb <command> [options]``.

Every option may also come from a JSON document given with ``--config``.
Top-level keys apply to all commands and a section named after the command
(``{"index": {...}}``) overrides them; explicit command-line flags override
both. Keys are the long option names with dashes replaced by underscores.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write_text, csv_text, fmt_float
from .analysis import (
    PCA2,
    average_index,
    default_seed,
    early_warning,
    elbow_select,
    inertia_curve,
    kmeans,
    normalize_indices,
)
from .backtest import (
    KINDS,
    StrategySpec,
    align_monthly,
    equity_csv,
    monthly_last,
    monthly_returns,
    report_csv,
    run_strategy,
)
from .exceptions import EmptyIntersection, KTooLarge, Misalignment, PhturbError
from .indices import (
    DEFAULT_GRID,
    IndexConfig,
    IndexSeries,
    default_grid,
    landscape_norm_index,
    phti,
    turbulence_grid,
)
from .marketdata import (
    inner_join,
    log_returns,
    read_price_csv,
    read_returns_csv,
    read_series_csv,
    returns_to_csv,
    simple_returns,
)

COMMANDS = ("ingest", "index", "cluster", "ews", "backtest", "plotdata")

DEFAULTS = {
    "common": {"out": ".", "seed": None},
    "ingest": {"date_column": "date", "close_column": "close", "forward_fill": False,
               "simple_returns": False},
    "index": {"pipeline": "turbulence", "column": None, "configs": None, "grid": None,
              "policy": "drop-essential", "max_scale": None, "jobs": 1,
              "window": 60, "smoothing": 60, "p": 1, "dim": 1, "w": 50},
    "cluster": {"k": None, "k_min": 1, "k_max": 8, "good_cluster": None},
    "ews": {"d": 4, "tau": 1, "w": 50, "k": None, "k_min": 1, "k_max": 8,
            "gap_tolerance": 5, "strong_threshold": 0.5},
    "backtest": {"strategies": list(KINDS), "lookback": 60, "index_column": None},
    "plotdata": {"crash_date": None, "svg": False, "index_column": None},
}


class ConfigError(PhturbError):
    pass


def _write(out, name, text, written):
    written.append(atomic_write_text(Path(out) / name, text))


def _write_json(out, name, obj, written):
    _write(out, name, json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n", written)


def _span(dates):
    if len(dates) == 0:
        return {"start": None, "end": None, "n": 0}
    return {"start": str(dates[0]), "end": str(dates[-1]), "n": int(len(dates))}


def _seed(opts):
    return int(opts["seed"]) if opts.get("seed") is not None else default_seed()


def _k_range(opts):
    return range(int(opts["k_min"]), int(opts["k_max"]) + 1)


def _require(opts, *keys):
    for key in keys:
        if not opts.get(key):
            raise ConfigError(f"missing required option --{key.replace('_', '-')}")


# -- ingest ------------------------------------------------------------------------

def cmd_ingest(opts):
    """Price CSVs -> aligned wide returns CSV."""
    _require(opts, "prices")
    schema = {"date": opts["date_column"], "close": opts["close_column"]}
    prices = [
        read_price_csv(p, schema, asset_id=Path(p).stem, forward_fill=bool(opts["forward_fill"]))
        for p in opts["prices"]
    ]
    prices = inner_join(prices) if len(prices) > 1 else prices
    to_returns = simple_returns if opts["simple_returns"] else log_returns
    returns = [to_returns(p) for p in prices]
    written = []
    _write(opts["out"], "returns.csv", returns_to_csv(returns), written)
    _write_json(opts["out"], "manifest.json", {
        "command": "ingest",
        "assets": [p.asset_id for p in prices],
        "kind": returns[0].kind,
        "span": _span(returns[0].dates),
    }, written)
    return written


# -- index ------------------------------------------------------------------------

def _load_returns(opts, columns=None):
    if opts.get("returns"):
        return read_returns_csv(opts["returns"], columns)
    if opts.get("prices"):
        return [log_returns(read_price_csv(p, asset_id=Path(p).stem)) for p in opts["prices"]]
    raise ConfigError("need --returns or --prices")


def _grid_from(opts):
    if opts.get("configs"):
        return [IndexConfig.from_label(lbl, policy=opts["policy"], max_scale=opts["max_scale"])
                for lbl in opts["configs"]]
    overrides = opts.get("grid") or {}
    unknown = set(overrides) - set(DEFAULT_GRID)
    if unknown:
        raise ConfigError(f"unknown grid keys {sorted(unknown)}")
    grid = default_grid(**overrides)
    if opts["policy"] != "drop-essential" or opts["max_scale"] is not None:
        grid = [IndexConfig(c.d, c.tau, c.w, c.T, c.dim, opts["policy"], opts["max_scale"]) for c in grid]
    if not grid:
        raise ConfigError("the index grid is empty")
    return grid


def cmd_index(opts):
    """Compute index series; one CSV per config plus a manifest."""
    pipeline = opts["pipeline"]
    written = []
    entries = []
    if pipeline == "turbulence":
        column = [opts["column"]] if opts.get("column") else None
        series = _load_returns(opts, column)
        x = series[0]
        grid = _grid_from(opts)
        results = turbulence_grid(x, grid, jobs=int(opts["jobs"]))
        for cfg, idx in results.items():
            _write(opts["out"], cfg.filename, idx.to_csv(), written)
            entries.append({"label": cfg.label, "file": cfg.filename, "d": cfg.d, "tau": cfg.tau,
                            "w": cfg.w, "T": cfg.T, "dim": cfg.dim, "policy": cfg.policy,
                            "max_scale": cfg.max_scale, **_span(idx.dates)})
        source = x.asset_id
    elif pipeline == "phti":
        series = _load_returns(opts)
        raw, smooth = phti(series, dim=int(opts["dim"]), window=int(opts["window"]),
                           smoothing=int(opts["smoothing"]), max_scale=opts["max_scale"])
        for idx, fname in ((raw, "phti_raw.csv"), (smooth, "phti.csv")):
            _write(opts["out"], fname, idx.to_csv(), written)
            entries.append({"label": idx.name, "file": fname, "window": int(opts["window"]),
                            "smoothing": int(opts["smoothing"]), "dim": int(opts["dim"]),
                            **_span(idx.dates)})
        source = [s.asset_id for s in series]
    elif pipeline == "landscape-norm":
        column = [opts["column"]] if opts.get("column") else None
        series = _load_returns(opts, column)
        idx = landscape_norm_index(series, int(opts["w"]), p=int(opts["p"]), dim=int(opts["dim"]),
                                   max_scale=opts["max_scale"])
        fname = f"norm_L{int(opts['p'])}_w{int(opts['w'])}_dim{int(opts['dim'])}.csv"
        _write(opts["out"], fname, idx.to_csv(), written)
        entries.append({"label": idx.name, "file": fname, "w": int(opts["w"]), "p": int(opts["p"]),
                        "dim": int(opts["dim"]), **_span(idx.dates)})
        source = [s.asset_id for s in series]
    else:
        raise ConfigError(f"unknown pipeline {pipeline!r}")
    _write_json(opts["out"], "manifest.json",
                {"command": "index", "pipeline": pipeline, "source": source, "configs": entries},
                written)
    return written


# -- cluster ----------------------------------------------------------------------

def _read_index_dir(path):
    files = sorted(Path(path).glob("idx_*.csv"))
    if not files:
        raise ConfigError(f"no idx_*.csv files in {path}")
    out = []
    for f in files:
        dates, values = read_series_csv(f)
        out.append(IndexSeries(f.stem.removeprefix("idx_"), dates, values))
    return out


def cmd_cluster(opts):
    """k-means over normalized indices, with PCA and elbow audit files."""
    _require(opts, "indices")
    indices = _read_index_dir(opts["indices"])
    norm = normalize_indices(indices)
    rows = norm.matrix
    seed = _seed(opts)
    ks = [k for k in _k_range(opts) if k <= rows.shape[0]]
    if opts.get("k") is not None:
        k = int(opts["k"])
        if k > rows.shape[0]:
            raise KTooLarge(f"k={k} exceeds the number of indices ({rows.shape[0]})")
        curve = inertia_curve(rows, ks, seed) if ks else {}
    else:
        curve = inertia_curve(rows, ks, seed)
        k = elbow_select(rows, ks, seed, curve)
    result = kmeans(rows, k, seed)
    dist = result.distances(rows)

    written = []
    out = opts["out"]
    _write(out, "assignments.csv", csv_text(
        ["config_label", "cluster_id", "distance_to_centroid"],
        ((lbl, int(c), fmt_float(d)) for lbl, c, d in zip(norm.labels, result.assignments, dist)),
    ), written)
    _write(out, "centroids.csv", csv_text(
        ["date"] + [f"cluster_{j}" for j in range(k)],
        ([str(d)] + [fmt_float(v) for v in result.centroids[:, i]] for i, d in enumerate(norm.dates)),
    ), written)
    if rows.shape[0] >= 2:
        pca = PCA2().fit(rows)
        proj = pca.transform(rows)
        _write(out, "pca.csv", csv_text(
            ["config_label", "cluster_id", "pc1", "pc2"],
            ((lbl, int(c), fmt_float(p[0]), fmt_float(p[1]))
             for lbl, c, p in zip(norm.labels, result.assignments, proj)),
        ), written)
    _write(out, "inertia.csv", csv_text(["k", "inertia"], ((kk, fmt_float(v)) for kk, v in curve.items())),
           written)
    summary = {"command": "cluster", "k": k, "k_selected_by": "user" if opts.get("k") is not None else "elbow",
               "seed": seed, "n_indices": len(norm.labels), "span": _span(norm.dates),
               "cluster_sizes": [int(np.sum(result.assignments == j)) for j in range(k)]}
    if opts.get("good_cluster") is not None:
        good = int(opts["good_cluster"])
        if not 0 <= good < k:
            raise ConfigError(f"--good-cluster {good} is not a cluster id (0..{k - 1})")
        members = [lbl for lbl, c in zip(norm.labels, result.assignments) if c == good]
        avg = average_index(norm, members)
        _write(out, "average_index.csv", avg.to_csv(), written)
        summary["good_cluster"] = {"id": good, "members": members}
    _write_json(out, "manifest.json", summary, written)
    return written


# -- ews --------------------------------------------------------------------------

def cmd_ews(opts):
    """Early-warning classification on one price series."""
    _require(opts, "prices")
    prices = read_price_csv(opts["prices"][0], asset_id=Path(opts["prices"][0]).stem)
    res = early_warning(prices, d=int(opts["d"]), tau=int(opts["tau"]), w=int(opts["w"]),
                        k=None if opts.get("k") is None else int(opts["k"]), seed=_seed(opts),
                        gap_tolerance=int(opts["gap_tolerance"]),
                        strong_threshold=float(opts["strong_threshold"]), k_range=_k_range(opts))
    written = []
    _write(opts["out"], "c1.csv", csv_text(
        ["date", "log_price", "norm_l1", "c1"],
        ((str(d), fmt_float(a), fmt_float(b), fmt_float(c))
         for d, a, b, c in zip(res.dates, res.log_price, res.norm_l1, res.c1)),
    ), written)
    verdict = res.verdict.to_dict()
    verdict.update({"d": int(opts["d"]), "tau": int(opts["tau"]), "w": int(opts["w"]),
                    "seed": _seed(opts), "span": _span(res.dates)})
    _write_json(opts["out"], "verdict.json", verdict, written)
    return written


# -- backtest ---------------------------------------------------------------------

def _monthly_asset_returns(opts):
    if opts.get("monthly_returns"):
        dates, values = read_series_csv(opts["monthly_returns"])
        return dates.astype("datetime64[M]"), values
    _require(opts, "prices")
    p = read_price_csv(opts["prices"][0])
    return monthly_returns(p.dates, p.closes)


def cmd_backtest(opts):
    """Quintile strategies against buy-and-hold; performance table and equity curves."""
    months, rets = _monthly_asset_returns(opts)
    kinds = list(opts["strategies"])
    bad = [k for k in kinds if k not in KINDS]
    if bad:
        raise ConfigError(f"unknown strategies {bad}; choose from {list(KINDS)}")
    lookback = int(opts["lookback"])

    index = None
    if opts.get("index"):
        idates, ivalues = read_series_csv(opts["index"], opts.get("index_column"))
        imonths, ivals = monthly_last(idates, ivalues)
        keep = months >= imonths[0]
        if not keep.any():
            raise Misalignment("the index starts after the last return month")
        months, rets = months[keep], rets[keep]
        rets, index = align_monthly(months, rets, imonths, ivals)
    elif any(k != "buy_and_hold" for k in kinds):
        raise ConfigError("strategies other than buy_and_hold need --index")

    written = []
    results = {}
    labels = [str(m) for m in months]
    for kind in kinds:
        res = run_strategy(rets, index, StrategySpec(kind, lookback), dates=labels)
        results[kind] = res
        _write(opts["out"], f"equity_{kind}.csv", equity_csv(res), written)
    _write(opts["out"], "report.csv", report_csv(results), written)
    first = next(iter(results.values()))
    _write_json(opts["out"], "manifest.json", {
        "command": "backtest", "strategies": kinds, "lookback": lookback,
        "traded_months": {"start": str(first.dates[0]), "end": str(first.dates[-1]),
                          "n": int(len(first.dates))} if len(first.dates) else _span([]),
    }, written)
    return written


# -- plotdata ---------------------------------------------------------------------

def _scale(v, lo, hi, a, b):
    return a if hi == lo else a + (v - lo) * (b - a) / (hi - lo)


def _polyline(xs, ys, color):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>'


def svg_chart(dates, price, index, crash_date=None, width=800, height=400) -> str:
    """Minimal two-axis line chart: index (blue, left) and price (green, right)."""
    left, right, top, bottom = 60, 60, 20, 40
    n = len(dates)
    xs = [_scale(i, 0, max(n - 1, 1), left, width - right) for i in range(n)]

    def ys(v):
        lo, hi = float(np.min(v)), float(np.max(v))
        return [_scale(float(y), lo, hi, height - bottom, top) for y in v], lo, hi

    iy, ilo, ihi = ys(index)
    py, plo, phi = ys(price)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{width - right}" y1="{top}" x2="{width - right}" y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" y2="{height - bottom}" stroke="black"/>',
        f'<text x="{left - 5}" y="{top + 10}" text-anchor="end" font-size="10">{ihi:.3g}</text>',
        f'<text x="{left - 5}" y="{height - bottom}" text-anchor="end" font-size="10">{ilo:.3g}</text>',
        f'<text x="{width - right + 5}" y="{top + 10}" font-size="10">{phi:.6g}</text>',
        f'<text x="{width - right + 5}" y="{height - bottom}" font-size="10">{plo:.6g}</text>',
        f'<text x="{left}" y="{height - 10}" font-size="10">{dates[0]}</text>',
        f'<text x="{width - right}" y="{height - 10}" text-anchor="end" font-size="10">{dates[-1]}</text>',
        _polyline(xs, iy, "blue"),
        _polyline(xs, py, "green"),
    ]
    if crash_date is not None:
        pos = int(np.searchsorted(dates, np.datetime64(crash_date, "D")))
        x = _scale(min(pos, n - 1), 0, max(n - 1, 1), left, width - right)
        parts.append(f'<line class="crash" x1="{x:.2f}" y1="{top}" x2="{x:.2f}" y2="{height - bottom}" '
                     f'stroke="red" stroke-dasharray="6,4"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_plotdata(opts):
    """Join an index with prices on common dates; optional SVG chart."""
    _require(opts, "prices", "index")
    p = read_price_csv(opts["prices"][0])
    idates, ivalues = read_series_csv(opts["index"], opts.get("index_column"))
    common, ip, ii = np.intersect1d(p.dates, idates, return_indices=True)
    if common.size == 0:
        raise EmptyIntersection("the index and the prices share no dates")
    price, index = p.closes[ip], ivalues[ii]
    written = []
    _write(opts["out"], "plot.csv", csv_text(
        ["date", "price", "index_value"],
        ((str(d), fmt_float(a), fmt_float(b)) for d, a, b in zip(common, price, index)),
    ), written)
    crash = opts.get("crash_date")
    if crash is not None:
        c = np.datetime64(crash, "D")
        if not common[0] <= c <= common[-1]:
            raise ConfigError(f"crash date {crash} lies outside {common[0]}..{common[-1]}")
    if opts.get("svg"):
        _write(opts["out"], "plot.svg", svg_chart(common, price, index, crash), written)
    return written


# -- argument handling -----------------------------------------------------------

HANDLERS = {
    "ingest": cmd_ingest,
    "index": cmd_index,
    "cluster": cmd_cluster,
    "ews": cmd_ews,
    "backtest": cmd_backtest,
    "plotdata": cmd_plotdata,
}


def _label_list(text):
    return [s for s in text.split(",") if s]


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="phturb", description="Topological turbulence indices for market data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", "-o", help="output directory (default: current directory)")
    common.add_argument("--seed", type=int, help="k-means seed (default: $TDA_SEED or 42)")

    p = sub.add_parser("ingest", parents=[common], argument_default=S, help="price CSVs -> returns CSV")
    p.add_argument("prices", nargs="*", help="price CSV files")
    p.add_argument("--date-column")
    p.add_argument("--close-column")
    p.add_argument("--forward-fill", action="store_true")
    p.add_argument("--simple-returns", action="store_true")

    p = sub.add_parser("index", parents=[common], argument_default=S, help="compute index series")
    p.add_argument("--returns", help="wide returns CSV")
    p.add_argument("--prices", nargs="+", help="price CSV files (log returns are taken)")
    p.add_argument("--column", help="returns column for single-asset pipelines")
    p.add_argument("--pipeline", choices=("turbulence", "phti", "landscape-norm"))
    p.add_argument("--configs", type=_label_list, help="comma-separated labels like d4_tau2_w60_T5_dim0")
    p.add_argument("--policy", choices=("drop-essential", "cap"))
    p.add_argument("--max-scale", type=float)
    p.add_argument("--jobs", "-j", type=int)
    p.add_argument("--window", type=int, help="PHTI window")
    p.add_argument("--smoothing", type=int, help="PHTI smoothing length")
    p.add_argument("--w", type=int, help="window for landscape-norm")
    p.add_argument("--p", type=int, help="L^p exponent for landscape-norm")
    p.add_argument("--dim", type=int, help="homology dimension for phti / landscape-norm")

    p = sub.add_parser("cluster", parents=[common], argument_default=S, help="cluster normalized indices")
    p.add_argument("--indices", help="directory holding idx_*.csv")
    p.add_argument("--k", type=int, help="number of clusters (default: elbow rule)")
    p.add_argument("--k-min", type=int)
    p.add_argument("--k-max", type=int)
    p.add_argument("--good-cluster", type=int, help="cluster id whose members are averaged")

    p = sub.add_parser("ews", parents=[common], argument_default=S, help="early warning signal")
    p.add_argument("--prices", nargs=1, help="price CSV")
    for name in ("d", "tau", "w", "k", "k-min", "k-max", "gap-tolerance"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--strong-threshold", type=float)

    p = sub.add_parser("backtest", parents=[common], argument_default=S, help="quintile strategies")
    p.add_argument("--prices", nargs=1, help="daily price CSV of the traded asset")
    p.add_argument("--monthly-returns", help="CSV date,value of monthly simple returns")
    p.add_argument("--index", help="CSV date,value index series (daily or monthly)")
    p.add_argument("--index-column")
    p.add_argument("--strategies", type=_label_list, help=f"comma-separated subset of {','.join(KINDS)}")
    p.add_argument("--lookback", type=int)

    p = sub.add_parser("plotdata", parents=[common], argument_default=S, help="joined plot data")
    p.add_argument("--prices", nargs=1, help="price CSV")
    p.add_argument("--index", help="CSV date,value index series")
    p.add_argument("--index-column")
    p.add_argument("--crash-date", help="YYYY-MM-DD marker for the SVG")
    p.add_argument("--svg", action="store_true")
    return parser


def resolve_options(command, cli_args: dict) -> dict:
    """Merge defaults < config top level < config section < command line."""
    opts = {**DEFAULTS["common"], **DEFAULTS[command]}
    path = cli_args.pop("config", None)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        opts.update({k: v for k, v in doc.items() if k not in COMMANDS})
        section = doc.get(command, {})
        if not isinstance(section, dict):
            raise ConfigError(f"{path}: section {command!r} must be an object")
        opts.update(section)
    opts.update(cli_args)
    if isinstance(opts.get("prices"), str):
        opts["prices"] = [opts["prices"]]
    if isinstance(opts.get("strategies"), str):
        opts["strategies"] = _label_list(opts["strategies"])
    if isinstance(opts.get("configs"), str):
        opts["configs"] = _label_list(opts["configs"])
    return opts


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    try:
        opts = resolve_options(command, args)
        HANDLERS[command](opts)
    except (PhturbError, OSError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"phturb {command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
