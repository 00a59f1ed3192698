"""Acceptance checks, one test per numbered criterion.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import json
import math
import time

import numpy as np
import pytest
from conftest import business_dates, price_csv
from oracles import bottleneck_bruteforce, oracle_diagrams, wasserstein_bruteforce

from phturb.analysis import early_warning
from phturb.backtest import (
    KINDS,
    StrategySpec,
    exposure,
    max_drawdown,
    performance,
    run_strategy,
)
from phturb.cli import main
from phturb.diagmetrics import bottleneck, wasserstein
from phturb.filtration import distance_matrix, vr_filtration
from phturb.indices import IndexConfig, default_grid, turbulence_grid, turbulence_index
from phturb.landscape import landscape_from_diagram, lp_norm
from phturb.marketdata import PriceSeries, ReturnSeries
from phturb.persistence import PersistenceDiagram, compute_persistence, rips_persistence


def as_list(dgm):
    return sorted(map(tuple, dgm.points.tolist()))


def dgm(points, dim=1):
    return PersistenceDiagram.from_points(dim, np.asarray(points, dtype=float).reshape(-1, 2))


def random_diagram(rng, max_size, dyadic=False):
    n = int(rng.integers(0, max_size + 1))
    if dyadic:
        b = rng.integers(0, 65, n) / 8
        return dgm(np.column_stack([b, b + rng.integers(1, 65, n) / 8]))
    b = rng.random(n)
    return dgm(np.column_stack([b, b + rng.uniform(0.01, 1.0, n)]))


def test_criterion_01_oracle_equivalence():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    checked = 0
    for i in range(200):
        n = int(rng.integers(1, 9))
        pts = rng.random((n, int(rng.integers(2, 4))))
        if i % 2:
            pts = np.round(pts * 3) / 3
        dm = distance_matrix(pts)
        want = oracle_diagrams(dm)
        got = compute_persistence(vr_filtration(dm, min(2, n - 1)), (0, 1))
        assert as_list(got[0]) == want[0], pts
        assert as_list(got[1]) == want[1], pts
        checked += 1
    elapsed = time.perf_counter() - start
    print(f"criterion 1: {checked} clouds in {elapsed:.1f}s")
    assert checked >= 200 and elapsed < 60


def test_criterion_02_square(square):
    dm = distance_matrix(square)
    got = compute_persistence(vr_filtration(dm, 2))
    (b, d), = got[1].points
    assert abs(b - 1.0) <= 1e-12 and abs(d - math.sqrt(2.0)) <= 1e-12
    assert as_list(got[0]) == [(0.0, 1.0)] * 3 + [(0.0, math.inf)]
    want = oracle_diagrams(dm)
    assert as_list(got[0]) == want[0] and as_list(got[1]) == want[1]


def test_criterion_03_landscape_norms():
    single = landscape_from_diagram(dgm([(0, 2)]))
    assert abs(lp_norm(single, 1) - 1.0) <= 1e-12
    assert abs(lp_norm(single, 2) - math.sqrt(2.0 / 3.0)) <= 1e-12
    rng = np.random.default_rng(103)
    for _ in range(100):
        pts = random_diagram(rng, 8).points
        if len(pts) == 0:
            pts = np.array([[0.2, 0.9]])
        c = rng.uniform(0.5, 3.0)
        p = int(rng.integers(1, 4))
        base = lp_norm(landscape_from_diagram(pts), p)
        scaled = lp_norm(landscape_from_diagram(c * pts), p)
        assert abs(scaled - c ** (1 + 1 / p) * base) <= 1e-9


def test_criterion_04_diagram_metrics():
    rng = np.random.default_rng(104)
    for _ in range(100):
        a, b = random_diagram(rng, 6, dyadic=True), random_diagram(rng, 6, dyadic=True)
        pa, pb = a.points.tolist(), b.points.tolist()
        assert bottleneck(a, b) == bottleneck_bruteforce(pa, pb)
        for p in (1, 2):
            assert wasserstein(a, b, p) == wasserstein_bruteforce(pa, pb, p)
    for _ in range(100):
        a, b, c = (random_diagram(rng, 6) for _ in range(3))
        for dist in (bottleneck, lambda x, y: wasserstein(x, y, 1), lambda x, y: wasserstein(x, y, 2)):
            ab, ba = dist(a, b), dist(b, a)
            assert dist(a, a) <= 1e-9
            assert abs(ab - ba) <= 1e-9
            assert ab >= 0
            assert ab <= dist(a, c) + dist(c, b) + 1e-9


def test_criterion_05_stability():
    rng = np.random.default_rng(105)
    for eps in (0.01, 0.05):
        for _ in range(100):
            pts = rng.random((10, 2))
            # uniform in the disc of radius eps
            angle = rng.uniform(0, 2 * np.pi, 10)
            radius = eps * np.sqrt(rng.random(10))
            moved = pts + np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
            a, b = rips_persistence(pts), rips_persistence(moved)
            for k in (0, 1):
                assert bottleneck(a[k], b[k]) <= 2 * eps + 1e-9


@pytest.mark.slow
def test_criterion_06_full_grid_runtime():
    grid = default_grid()
    assert len(grid) == 240 and len(set(grid)) == 240
    rng = np.random.default_rng(106)
    x = ReturnSeries("synthetic", business_dates(400), rng.normal(0, 0.01, 400))
    start = time.perf_counter()
    results = turbulence_grid(x, grid)
    elapsed = time.perf_counter() - start
    print(f"criterion 6: 240 configs on 400 days in {elapsed:.1f}s")
    assert len(results) == 240
    assert all(len(idx) == 400 - cfg.min_length + 1 for cfg, idx in results.items())
    assert elapsed < 600


@pytest.mark.slow
def test_criterion_07_zero_turbulence():
    x = ReturnSeries("flat", business_dates(400), np.zeros(400))
    results = turbulence_grid(x, default_grid())
    assert len(results) == 240
    for idx in results.values():
        assert len(idx) > 0 and np.all(idx.values == 0.0)


def crash_series(seed):
    rng = np.random.default_rng(seed)
    calm = rng.normal(0, 0.005, 300)
    storm = rng.normal(0, 0.05, 20)
    storm += (math.log(0.7) - storm.sum()) / 20
    return ReturnSeries("crash", business_dates(320), np.concatenate([calm, storm]))


def test_criterion_08_crash_detection():
    cfg = IndexConfig(4, 2, 60, 5, 0)
    x = crash_series(108)
    assert math.isclose(math.exp(x.values[300:].sum()), 0.7, rel_tol=1e-12)
    idx = turbulence_index(x, cfg)
    peak = np.searchsorted(x.dates, idx.dates[int(np.argmax(idx.values))])
    offset = int(peak) - 300
    print(f"criterion 8: peak {offset} trading days after the break")
    assert 0 <= offset <= cfg.w + cfg.T


def test_criterion_09_exposure_tables():
    want = {
        "protection": (100, 100, 100, 100, 0),
        "flexible": (100, 80, 60, 40, 20),
        "leverage": (120, 110, 90, 60, 20),
        "buy_and_hold": (100, 100, 100, 100, 100),
    }
    for kind, row in want.items():
        assert tuple(exposure(kind, n) for n in range(1, 6)) == row


def test_criterion_10_performance_identities():
    rng = np.random.default_rng(110)
    r = rng.normal(0.006, 0.045, 240)
    index = np.abs(rng.normal(size=240)).cumsum() % 7
    for kind in KINDS:
        perf = performance(run_strategy(r, index, StrategySpec(kind, 60)))
        assert abs(perf.sr - perf.mu / perf.sigma) <= 1e-12
    assert round(8.55 / 14.18, 2) == 0.60
    assert max_drawdown([100, 120, 60, 130]) == 50.0


def _pipeline(inputs, out):
    cfg = out / "config.json"
    cfg.write_text(json.dumps({
        "seed": 11,
        "index": {"grid": {"d": [3, 4], "tau": [1], "w": [30], "T": [1, 5], "dim": [0, 1]}},
        "cluster": {"k_max": 4, "good_cluster": 0},
        "backtest": {"lookback": 12},
    }))
    steps = [
        ["ingest", inputs / "asset.csv", "-o", out / "ingest"],
        ["index", "--returns", out / "ingest" / "returns.csv", "-o", out / "index"],
        ["cluster", "--indices", out / "index", "-o", out / "cluster"],
        ["ews", "--prices", inputs / "asset.csv", "-o", out / "ews"],
        ["backtest", "--prices", inputs / "asset.csv", "--index", out / "cluster" / "average_index.csv",
         "-o", out / "backtest"],
        ["plotdata", "--prices", inputs / "asset.csv", "--index", out / "cluster" / "average_index.csv",
         "--svg", "--crash-date", "2017-03-01", "-o", out / "plot"],
    ]
    for argv in steps:
        assert main([str(a) for a in argv] + ["--config", str(cfg)]) == 0, argv
    return {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}


def test_criterion_11_determinism(tmp_path):
    rng = np.random.default_rng(111)
    inputs = tmp_path / "in"
    inputs.mkdir()
    closes = 100 * np.exp(np.concatenate([[0.0], np.cumsum(rng.normal(0.0003, 0.011, 1100))]))
    (inputs / "asset.csv").write_text(price_csv(business_dates(len(closes), "2014-01-02"), closes))
    runs = []
    for name in ("first", "second"):
        (tmp_path / name).mkdir()
        runs.append(_pipeline(inputs, tmp_path / name))
    assert len(runs[0]) > 20
    assert runs[0] == runs[1]


def _price_series(returns):
    p = 100 * np.exp(np.concatenate([[0.0], np.cumsum(returns)]))
    return PriceSeries("x", business_dates(len(p), "2015-01-02"), p)


def test_criterion_12_early_warning():
    flat = early_warning(_price_series(np.zeros(300)), d=4, w=50)
    assert flat.verdict.classification == "none"
    rng = np.random.default_rng(0)
    t = np.arange(80)
    ramp = 0.025 + 0.02 * np.sin(2 * np.pi * t / 11) + rng.normal(0, 1e-4, 80)
    res = early_warning(_price_series(np.concatenate([rng.normal(0, 1e-4, 250), ramp])), d=4, w=50)
    assert res.verdict.classification == "strong"
