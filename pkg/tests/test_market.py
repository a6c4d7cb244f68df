import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathpdf.market import (
    EmptyInputError,
    MonotonicityError,
    PriceSeries,
    PriceSheetError,
    RangeError,
    build_histogram,
    load_price_sheet,
    log_returns,
)

from oracles import normal_pdf


def test_two_rows():
    s = load_price_sheet(b"0,100\n60,105\n")
    assert len(s) == 2 and s.sample_count == 2
    assert s.interval == 60.0


def test_negative_price_reports_line():
    with pytest.raises(PriceSheetError) as err:
        load_price_sheet(b"time,price\n0,100\n60,-3\n120,101\n")
    assert err.value.line == 3
    assert "line 3" in str(err.value)


@pytest.mark.parametrize("text,line", [
    (b"0,100\n60,101\n60,102\n", 3),
    (b"0,100\n120,101\n60,102\n", 3),
])
def test_monotonicity(text, line):
    with pytest.raises(MonotonicityError) as err:
        load_price_sheet(text)
    assert err.value.line == line


@pytest.mark.parametrize("text", [b"", b"\n\n", b"timestamp,price\n"])
def test_empty_input(text):
    with pytest.raises(EmptyInputError):
        load_price_sheet(text)


@pytest.mark.parametrize("text,line", [
    (b"0,100\n60\n", 2),
    (b"0,100\n60,abc\n", 2),
    (b"0,100\nsoon,101\n", 2),
    (b"0,100\n60,0\n", 2),
])
def test_malformed_rows(text, line):
    with pytest.raises(PriceSheetError) as err:
        load_price_sheet(text)
    assert err.value.line == line


@pytest.mark.parametrize("text", [
    "t\tp\n0\t100\n60\t105\n",
    "0;100\n60;105\n",
    "0 100\n60   105\n",
    "0|100\n60|105\n",
    "date,close\n2020-03-02T09:30:00Z,100\n2020-03-02T09:31:00Z,105\n",
    "2020-03-02 09:30:00,100\n2020-03-02 09:31:00,105\n",
])
def test_formats(text):
    s = load_price_sheet(io.StringIO(text))
    np.testing.assert_allclose(s.prices, [100, 105])
    assert s.timestamps[1] - s.timestamps[0] == 60


def test_large_minute_sheet(tmp_path):
    n = 30000
    rng = np.random.default_rng(0)
    prices = 100 * np.exp(np.cumsum(rng.normal(0, 1e-3, n)))
    path = tmp_path / "sheet.csv"
    with open(path, "w") as fh:
        fh.write("timestamp,price\n")
        for i, p in enumerate(prices):
            fh.write(f"{1_600_000_000 + 60 * i},{p:.6f}\n")
    s = load_price_sheet(str(path))
    assert s.sample_count == n
    ret = log_returns(s, stride=5)
    assert ret.size == n - 5
    five = PriceSeries(s.timestamps[::5], s.prices[::5])
    assert five.sample_count == 6000
    np.testing.assert_allclose(ret[::5], log_returns(five), rtol=1e-12)


def test_log_return_examples():
    s = PriceSeries([0, 60], [100.0, 105.0])
    np.testing.assert_allclose(log_returns(s), [math.log(1.05)])
    assert log_returns(s)[0] == pytest.approx(0.048790, abs=1e-6)
    flat = PriceSeries(np.arange(10) * 60.0, np.full(10, 7.5))
    assert np.all(log_returns(flat, 3) == 0)
    with pytest.raises(ValueError):
        log_returns(flat, 0)
    with pytest.raises(ValueError):
        log_returns(flat, 10)


def test_gaps_are_skipped_and_counted():
    t = np.array([0, 60, 120, 180, 3600, 3660, 3720], dtype=float)
    s = PriceSeries(t, np.arange(1.0, 8.0))
    diag = {}
    r = log_returns(s, 1, diagnostics=diag)
    assert diag == {"pairs": 6, "skipped_gaps": 1}
    assert r.size == 5


def test_histogram_counting_example():
    h = build_histogram([0.1, 0.2, 0.3, 0.4], bins=2, span=1.0)
    np.testing.assert_allclose(h.density, [0.0, 2.0])
    np.testing.assert_allclose(h.errbar, [0.0, 1.0])
    assert h.width == 0.5 and h.counts.tolist() == [0, 4]


def test_histogram_errors():
    with pytest.raises(RangeError):
        build_histogram([5.0, 6.0], 4, 1.0)
    with pytest.raises(ValueError):
        build_histogram([], 4, 1.0)
    with pytest.raises(ValueError):
        build_histogram([0.0], 1, 1.0)


def test_mean_centered_histogram():
    h = build_histogram([1.0, 1.1, 0.9, 1.0], 4, 0.4, center="mean")
    assert np.mean(h.bin_centers) == pytest.approx(1.0)


def test_fig1_configuration():
    rng = np.random.default_rng(5)
    r = rng.standard_t(3, 30000) * 5e-4
    h = build_histogram(r, 120, 0.011)
    assert h.bins == 120 and h.width == pytest.approx(0.011 / 120)
    assert h.counts.sum() + h.out_of_range == 30000


def test_synthetic_normal_histogram():
    sd = 0.01
    x = np.random.default_rng(0).normal(0.0, sd, 100_000)
    h = build_histogram(x, 70, 8 * sd)
    ref = normal_pdf(h.bin_centers, 0.0, sd)
    filled = h.counts > 0
    ok = np.abs(h.density - ref)[filled] <= 3 * h.errbar[filled]
    assert ok.mean() >= 0.95


returns = st.lists(st.floats(-0.05, 0.05), min_size=1, max_size=300)


@settings(max_examples=60, deadline=None)
@given(returns, st.integers(2, 50), st.floats(0.01, 0.2))
def test_histogram_invariants(r, bins, span):
    try:
        h = build_histogram(r, bins, span)
    except RangeError:
        assert all(abs(v) >= span / 2 for v in r)
        return
    assert np.sum(h.density) * h.width == pytest.approx(1.0, abs=1e-9)
    assert np.all(h.errbar >= 0)
    assert h.counts.sum() + h.out_of_range == len(r)
    filled = h.counts > 0
    np.testing.assert_allclose(h.errbar[filled] / h.density[filled], 1 / np.sqrt(h.counts[filled]), rtol=1e-12)
    np.testing.assert_allclose(np.diff(h.bin_centers), h.width, rtol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1.0, 1000.0), min_size=3, max_size=60), st.floats(1e-3, 1e3))
def test_price_scaling_leaves_returns_unchanged(prices, factor):
    s = PriceSeries(np.arange(len(prices)) * 60.0, prices)
    a, b = log_returns(s), log_returns(s.scaled(factor))
    np.testing.assert_allclose(a, b, atol=1e-12)
    # prices in [1, 1000] keep every return inside +-8
    edges = np.linspace(-8.0, 8.0, 17)
    if np.min(np.abs(a[:, None] - edges[None, :])) > 1e-9:
        ha, hb = build_histogram(a, 16, 16.0), build_histogram(b, 16, 16.0)
        np.testing.assert_array_equal(ha.counts, hb.counts)
        np.testing.assert_array_equal(ha.density, hb.density)
