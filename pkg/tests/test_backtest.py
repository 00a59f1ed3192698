import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from phturb.backtest import (
    EXPOSURE_TABLE,
    Performance,
    StrategySpec,
    align_monthly,
    equity_csv,
    exposure,
    max_drawdown,
    monthly_last,
    monthly_returns,
    performance,
    quintile_of,
    report_csv,
    run_strategy,
)
from phturb.exceptions import BadLookback, BadQuintile, InsufficientHistory, Misalignment, TooShort

HISTORY = np.arange(1.0, 61.0)


def test_quintile_examples():
    assert quintile_of(HISTORY, 0) == 1
    assert quintile_of(HISTORY, 61) == 5
    assert quintile_of(HISTORY, 30.5) == 3
    p = np.percentile(HISTORY, [40, 60])
    assert p.tolist() == pytest.approx([24.6, 36.4])


def test_quintile_boundaries():
    p20, p80 = np.percentile(HISTORY, [20, 80])
    assert quintile_of(HISTORY, p20) == 1
    assert quintile_of(HISTORY, np.nextafter(p20, np.inf)) == 2
    assert quintile_of(HISTORY, p80) == 4
    assert quintile_of(HISTORY, np.nextafter(p80, np.inf)) == 5
    with pytest.raises(BadLookback):
        quintile_of(HISTORY[:10], 3, lookback=60)
    with pytest.raises(BadLookback):
        quintile_of([1, 2, 3], 2)


def test_exposure_tables():
    assert tuple(exposure("protection", n) for n in range(1, 6)) == (100, 100, 100, 100, 0)
    assert tuple(exposure("flexible", n) for n in range(1, 6)) == (100, 80, 60, 40, 20)
    assert tuple(exposure("leverage", n) for n in range(1, 6)) == (120, 110, 90, 60, 20)
    assert exposure("flexible", 3) == 60 and exposure("leverage", 4) == 60
    assert exposure("protection", 5) == 0
    assert set(EXPOSURE_TABLE) == {"protection", "flexible", "leverage", "buy_and_hold"}
    for bad in (0, 6, 2.0, True):
        with pytest.raises(BadQuintile):
            exposure("flexible", bad)


def test_spec_validation():
    with pytest.raises(BadLookback):
        StrategySpec("flexible", 4)
    with pytest.raises(ValueError):
        StrategySpec("yolo")


def test_buy_and_hold_compounding():
    res = run_strategy([0.10, -0.10], None, StrategySpec())
    np.testing.assert_allclose(res.equity, [1.0, 1.1, 0.99])


def months_of_returns(n, seed):
    return np.random.default_rng(seed).normal(0.005, 0.04, n)


def test_pinned_quintiles():
    r = months_of_returns(80, 0)
    rising = np.arange(80.0)  # latest always the highest: quintile 5
    prot = run_strategy(r, rising, StrategySpec("protection", 10))
    assert np.all(prot.equity == 1.0)
    falling = -np.arange(80.0)  # latest always the lowest: quintile 1
    flex = run_strategy(r, falling, StrategySpec("flexible", 10))
    bh = run_strategy(r, falling, StrategySpec("buy_and_hold", 10))
    np.testing.assert_array_equal(flex.equity, bh.equity)
    lev = run_strategy(r, falling, StrategySpec("leverage", 10))
    assert np.all(lev.exposures == 120)


def test_trading_uses_only_past_index():
    r = months_of_returns(30, 1)
    idx = np.random.default_rng(2).random(30)
    res = run_strategy(r, idx, StrategySpec("flexible", 10))
    assert len(res.returns) == 20
    for i, m in enumerate(range(10, 30)):
        q = quintile_of(idx[m - 10:m], idx[m - 1])
        assert res.exposures[i] == exposure("flexible", q)
    # changing the index in the traded month itself changes nothing for that month
    idx2 = idx.copy()
    idx2[10] = 1e9
    assert run_strategy(r, idx2, StrategySpec("flexible", 10)).exposures[0] == res.exposures[0]


def test_run_errors():
    with pytest.raises(Misalignment):
        run_strategy(np.zeros(20), np.zeros(19), StrategySpec("flexible", 5))
    with pytest.raises(InsufficientHistory):
        run_strategy(np.zeros(10), np.zeros(10), StrategySpec("flexible", 10))
    with pytest.raises(InsufficientHistory):
        run_strategy(np.zeros(10), None, StrategySpec("flexible", 5))


def test_max_drawdown_examples():
    assert max_drawdown([100, 120, 60, 130]) == 50.0
    assert max_drawdown(np.cumprod(np.full(24, 1.01))) == 0.0


@given(arrays(float, st.integers(2, 50), elements=st.floats(0.01, 100)), st.floats(0.01, 100))
def test_max_drawdown_scale_invariant(e, c):
    assert max_drawdown(e * c) == pytest.approx(max_drawdown(e), abs=1e-9)
    assert 0.0 <= max_drawdown(e) <= 100.0


def test_table5_benchmark_ratio():
    assert round(8.55 / 14.18, 2) == 0.60


@given(arrays(float, st.integers(12, 120), elements=st.floats(-0.3, 0.3)))
def test_performance_identities(r):
    res = run_strategy(r, None, StrategySpec())
    perf = performance(res)
    if perf.sigma > 0:
        assert perf.sr == pytest.approx(perf.mu / perf.sigma, rel=1e-12)
        assert abs(perf.sr - perf.mu / perf.sigma) <= 1e-12 * max(1.0, abs(perf.sr))
    assert perf.mu == pytest.approx(1200 * np.mean(r))
    assert perf.sigma == pytest.approx(np.sqrt(12) * 100 * np.std(r, ddof=1))


def test_performance_needs_a_year():
    with pytest.raises(TooShort):
        performance(run_strategy(np.zeros(11), None, StrategySpec()))
    constant = performance(run_strategy(np.full(12, 0.01), None, StrategySpec()))
    assert constant.max_dd == 0.0


def test_monthly_sampling():
    dates = np.array(["2020-01-30", "2020-01-31", "2020-02-03", "2020-02-28", "2020-03-02"],
                     dtype="datetime64[D]")
    months, vals = monthly_last(dates, [1.0, 2.0, 3.0, 4.0, 5.0])
    assert [str(m) for m in months] == ["2020-01", "2020-02", "2020-03"]
    assert vals.tolist() == [2.0, 4.0, 5.0]
    m, r = monthly_returns(dates, [1.0, 2.0, 3.0, 4.0, 5.0])
    np.testing.assert_allclose(r, [1.0, 0.25])
    assert str(m[0]) == "2020-02"


def test_align_monthly():
    ret_m = np.arange("2020-01", "2020-05", dtype="datetime64[M]")
    idx_m = np.arange("2019-11", "2020-06", dtype="datetime64[M]")
    r, i = align_monthly(ret_m, [1, 2, 3, 4], idx_m, np.arange(7.0))
    assert i.tolist() == [2, 3, 4, 5]
    with pytest.raises(Misalignment):
        align_monthly(ret_m, [1, 2, 3, 4], idx_m[[0, 1, 2, 4, 5, 6]], np.arange(6.0))


def test_report_and_equity_csv():
    r = months_of_returns(30, 3)
    results = {"buy_and_hold": run_strategy(r, None, StrategySpec())}
    text = report_csv(results)
    lines = text.splitlines()
    assert lines[0] == "measure,buy_and_hold"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["mu", "sigma", "SR", "maxDD"]
    assert isinstance(performance(results["buy_and_hold"]), Performance)
    eq = equity_csv(results["buy_and_hold"]).splitlines()
    assert eq[0] == "month,exposure,return,equity" and len(eq) == 31
