import datetime as dt

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dynalloc.errors import (
    EmptyPanel,
    ImplausibleReturn,
    MissingValue,
    NonMonotonicDates,
    NonPositivePrice,
    UnknownAsset,
    WeightSumError,
)
from dynalloc.panel import (
    CompositeSpec,
    ReturnPanel,
    composite_index,
    inner_join,
    load_panel,
    month_ends,
)


def write_csv(path, text):
    path.write_text(text)
    return str(path)


class TestLoadPanel:
    def test_returns_parsed_verbatim(self, tmp_path):
        p = write_csv(
            tmp_path / "r.csv",
            "date,spx,agg\n2020-01-02,0.01,-0.002\n2020-01-03,0.005,0.001\n",
        )
        panel = load_panel(p, kind="returns")
        assert panel.assets == ("spx", "agg")
        assert panel.dates == (dt.date(2020, 1, 2), dt.date(2020, 1, 3))
        assert_allclose(panel.values, [[0.01, -0.002], [0.005, 0.001]])

    def test_prices_become_simple_returns(self, tmp_path):
        p = write_csv(tmp_path / "p.csv", "date,a\n2020-01-02,100\n2020-01-03,101\n")
        panel = load_panel(p, kind="prices")
        assert panel.dates == (dt.date(2020, 1, 3),)
        assert_allclose(panel.values, [[0.01]])

    def test_nan_cell_is_missing_value(self, tmp_path):
        p = write_csv(tmp_path / "m.csv", "date,a\n2020-01-02,NaN\n")
        with pytest.raises(MissingValue):
            load_panel(p)

    def test_empty_cell_is_missing_value(self, tmp_path):
        p = write_csv(tmp_path / "m.csv", "date,a,b\n2020-01-02,0.01,\n")
        with pytest.raises(MissingValue):
            load_panel(p)

    def test_nonpositive_price_rejected(self, tmp_path):
        p = write_csv(tmp_path / "p.csv", "date,a\n2020-01-02,100\n2020-01-03,0\n")
        with pytest.raises(NonPositivePrice):
            load_panel(p, kind="prices")

    def test_non_monotonic_dates_rejected(self, tmp_path):
        p = write_csv(
            tmp_path / "d.csv", "date,a\n2020-01-03,0.01\n2020-01-02,0.01\n"
        )
        with pytest.raises(NonMonotonicDates):
            load_panel(p)

    def test_header_only_is_empty(self, tmp_path):
        p = write_csv(tmp_path / "e.csv", "date,a\n")
        with pytest.raises(EmptyPanel):
            load_panel(p)

    def test_price_return_wealth_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        prices = 100.0 * np.cumprod(1 + 0.01 * rng.standard_normal(300))
        lines = ["date,a"]
        day = dt.date(2015, 1, 1)
        for px in prices:
            day += dt.timedelta(days=1)
            lines.append(f"{day.isoformat()},{float(px)!r}")
        panel = load_panel(write_csv(tmp_path / "rt.csv", "\n".join(lines) + "\n"), kind="prices")
        wealth = np.prod(1.0 + panel.values[:, 0])
        assert_allclose(wealth, prices[-1] / prices[0], rtol=1e-12)


class TestReturnPanel:
    def test_values_are_immutable(self):
        panel = ReturnPanel((dt.date(2020, 1, 2),), ("a",), np.array([[0.01]]))
        with pytest.raises(ValueError):
            panel.values[0, 0] = 0.5

    def test_absurd_return_rejected(self):
        with pytest.raises(ImplausibleReturn):
            ReturnPanel((dt.date(2020, 1, 2),), ("a",), np.array([[1.5]]))

    def test_through_slices_inclusively(self):
        dates = tuple(dt.date(2020, 1, d) for d in (2, 3, 6))
        panel = ReturnPanel(dates, ("a",), np.array([[0.01], [0.02], [0.03]]))
        cut = panel.through(dt.date(2020, 1, 3))
        assert cut.dates == dates[:2]
        assert_allclose(cut.values[:, 0], [0.01, 0.02])


class TestComposite:
    def test_weighted_sum_example(self):
        dates = (dt.date(2020, 1, 2),)
        panel = ReturnPanel(dates, ("eq", "bd", "cm"), np.array([[0.01, 0.00, -0.01]]))
        spec = CompositeSpec({"eq": 0.5, "bd": 0.4, "cm": 0.1})
        out = composite_index(panel, spec)
        assert out.assets == ("composite",)
        assert_allclose(out.values[0, 0], 0.004, atol=1e-15)

    def test_single_asset_identity(self):
        dates = tuple(dt.date(2020, 1, d) for d in (2, 3))
        panel = ReturnPanel(dates, ("a",), np.array([[0.01], [-0.02]]))
        out = composite_index(panel, CompositeSpec({"a": 1.0}))
        assert_allclose(out.values, panel.values)

    def test_bad_weight_sum(self):
        with pytest.raises(WeightSumError):
            CompositeSpec({"a": 0.6, "b": 0.6})

    def test_negative_weight(self):
        with pytest.raises(WeightSumError):
            CompositeSpec({"a": 1.5, "b": -0.5})

    def test_unknown_asset(self):
        panel = ReturnPanel((dt.date(2020, 1, 2),), ("a",), np.array([[0.01]]))
        with pytest.raises(UnknownAsset):
            composite_index(panel, CompositeSpec({"zzz": 1.0}))

    def test_linearity(self):
        rng = np.random.default_rng(3)
        dates = tuple(dt.date(2020, 1, 1) + dt.timedelta(days=i) for i in range(20))
        values = 0.01 * rng.standard_normal((20, 3))
        spec = CompositeSpec({"a": 0.5, "b": 0.3, "c": 0.2})
        one = composite_index(ReturnPanel(dates, ("a", "b", "c"), values), spec)
        half = composite_index(ReturnPanel(dates, ("a", "b", "c"), 0.5 * values), spec)
        assert_allclose(half.values, 0.5 * one.values, atol=1e-15)


class TestMonthEnds:
    def test_definition(self):
        dates = (dt.date(2020, 1, 30), dt.date(2020, 1, 31), dt.date(2020, 2, 27))
        panel = ReturnPanel(dates, ("a",), np.zeros((3, 1)))
        assert month_ends(panel) == [dt.date(2020, 1, 31), dt.date(2020, 2, 27)]

    def test_single_date(self):
        panel = ReturnPanel((dt.date(2020, 3, 17),), ("a",), np.zeros((1, 1)))
        assert month_ends(panel) == [dt.date(2020, 3, 17)]

    def test_empty_panel(self):
        panel = ReturnPanel((), ("a",), np.zeros((0, 1)))
        with pytest.raises(EmptyPanel):
            month_ends(panel)

    def test_subset_and_increasing(self):
        rng = np.random.default_rng(5)
        day = dt.date(2019, 6, 1)
        dates = []
        while len(dates) < 400:
            day += dt.timedelta(days=1)
            if day.weekday() < 5 and rng.random() > 0.05:
                dates.append(day)
        panel = ReturnPanel(tuple(dates), ("a",), np.zeros((len(dates), 1)))
        ends = month_ends(panel)
        assert set(ends) <= set(dates)
        assert all(b > a for a, b in zip(ends, ends[1:]))
        for e in ends:
            later_same_month = [
                d for d in dates if (d.year, d.month) == (e.year, e.month) and d > e
            ]
            assert later_same_month == []


class TestInnerJoin:
    def test_common_dates_only(self):
        d1 = (dt.date(2020, 1, 2), dt.date(2020, 1, 3), dt.date(2020, 1, 6))
        d2 = (dt.date(2020, 1, 3), dt.date(2020, 1, 6), dt.date(2020, 1, 7))
        a = ReturnPanel(d1, ("a",), np.array([[0.01], [0.02], [0.03]]))
        b = ReturnPanel(d2, ("b",), np.array([[0.1], [0.2], [0.3]]))
        joined = inner_join(a, b)
        assert joined.dates == (dt.date(2020, 1, 3), dt.date(2020, 1, 6))
        assert_allclose(joined.values, [[0.02, 0.1], [0.03, 0.2]])

    def test_no_overlap(self):
        a = ReturnPanel((dt.date(2020, 1, 2),), ("a",), np.array([[0.01]]))
        b = ReturnPanel((dt.date(2020, 1, 3),), ("b",), np.array([[0.01]]))
        with pytest.raises(EmptyPanel):
            inner_join(a, b)
