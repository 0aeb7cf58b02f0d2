"""Output writers: exact headers, round-trip floats, byte determinism."""

import datetime as dt
import json
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from dynalloc import io
from dynalloc.alphas import ForecastSet
from dynalloc.backtest import StrategyMetrics
from dynalloc.dependence import DccParams, TCopulaParams
from dynalloc.regimes import RegimeProbSeries
from dynalloc.scenarios import RiskForecast
from dynalloc.univariate import ArmaGarchParams


def read(path):
    return path.read_text(encoding="utf-8")


def assert_deterministic(write, path):
    first = read(write(path))
    assert read(write(path)) == first
    return first


def fake_model():
    rbar = np.array([[1.0, 0.4], [0.4, 1.0]])
    return SimpleNamespace(
        assets=("eq", "fi"),
        window_kind="expanding",
        window_start=dt.date(2001, 1, 2),
        window_end=dt.date(2005, 12, 30),
        marginals=(
            ArmaGarchParams(mu=0.01, phi=0.1, theta=0.0, alpha0=0.05, alpha1=0.07, beta1=0.9),
            ArmaGarchParams(mu=0.02, phi=0.0, theta=0.2, alpha0=0.03, alpha1=0.05, beta1=0.92),
        ),
        dcc=DccParams(a=0.03, b=0.94, rbar=rbar),
        copula=TCopulaParams(corr=rbar, nu=7.5),
    )


class TestJointModel:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "model.json"
        text = assert_deterministic(
            lambda p: io.write_joint_model(fake_model(), {"eq": -101.25, "fi": -99.5}, p),
            path,
        )
        doc = json.loads(text)
        assert doc["assets"] == ["eq", "fi"]
        assert doc["window"] == {"kind": "expanding", "start": "2001-01-02", "end": "2005-12-30"}
        assert doc["marginals"]["eq"]["alpha1"] == 0.07
        assert doc["marginals"]["fi"]["loglik"] == -99.5
        assert doc["dcc"]["a"] == 0.03
        assert doc["dcc"]["rbar"][0][1] == 0.4
        assert doc["copula"]["nu"] == 7.5

    def test_keys_sorted(self, tmp_path):
        text = read(io.write_joint_model(fake_model(), {"eq": 0.0, "fi": 0.0}, tmp_path / "m.json"))
        top = [line.strip().split(":")[0].strip('"') for line in text.splitlines()
               if line.startswith('  "')]
        assert top == sorted(top)


class TestDependenceMatrix:
    def test_triangles(self, tmp_path):
        pearson = np.array([[1.0, 0.2, 0.3], [0.2, 1.0, 0.4], [0.3, 0.4, 1.0]])
        tail = np.array([[1.0, 0.05, 0.06], [0.05, 1.0, 0.07], [0.06, 0.07, 1.0]])
        path = io.write_dependence_matrix(("a", "b", "c"), pearson, tail, tmp_path / "d.csv")
        lines = read(path).splitlines()
        assert lines[0] == ",a,b,c"
        cells = [line.split(",") for line in lines[1:]]
        assert [row[0] for row in cells] == ["a", "b", "c"]
        got = np.array([[float(v) for v in row[1:]] for row in cells])
        assert got[1, 0] == 0.2 and got[2, 1] == 0.4
        assert got[0, 1] == 0.05 and got[1, 2] == 0.07
        assert np.all(np.diag(got) == 1.0)


class TestForecastWriters:
    def test_risk_rows(self, tmp_path):
        rf = RiskForecast(var=0.1, cvar=0.15, vol=0.2, corr=np.eye(2), wpc=0.18)
        lines = read(
            io.write_risk_forecasts([dt.date(2020, 1, 31)], [rf], tmp_path / "r.csv")
        ).splitlines()
        assert lines == ["date,cvar,vol,wpc", "2020-01-31,0.15,0.2,0.18"]

    def test_correlations_upper_pairs_only(self, tmp_path):
        mat = np.array([[1.0, 0.5, 0.25], [0.5, 1.0, 0.75], [0.25, 0.75, 1.0]])
        lines = read(
            io.write_forecast_correlations(
                [dt.date(2020, 1, 31)], [mat], ("x", "y", "z"), tmp_path / "c.csv"
            )
        ).splitlines()
        assert lines[0] == "date,asset_i,asset_j,corr"
        assert lines[1:] == [
            "2020-01-31,x,y,0.5",
            "2020-01-31,x,z,0.25",
            "2020-01-31,y,z,0.75",
        ]

    def test_float_cells_round_trip(self, tmp_path):
        values = [0.1, 1.0 / 3.0, 2.063e-4]
        rf = RiskForecast(var=0.0, cvar=values[0], vol=values[1], corr=np.eye(1), wpc=values[2])
        line = read(
            io.write_risk_forecasts([dt.date(2020, 1, 31)], [rf], tmp_path / "r.csv")
        ).splitlines()[1]
        cells = line.split(",")[1:]
        assert [float(c) for c in cells] == values


class TestRegimeSeries:
    def make(self, tmp_path, with_corr):
        dates = [dt.date(2020, 1, 1) + dt.timedelta(days=i) for i in range(4)]
        probs = RegimeProbSeries(
            predicted=np.array([0.5, 0.6, 0.7, 0.8]),
            filtered=np.array([0.55, 0.65, 0.75, 0.85]),
            smoothed=np.array([0.52, 0.62, 0.72, 0.82]),
        )
        oos = np.array([np.nan, np.nan, 0.9, 0.95])
        risk = np.array(["low", "high", "high", "high"])
        corr = np.array(["low", "low", "high", "high"]) if with_corr else None
        four = (
            np.array(["LR/LC", "HR/LC", "HR/HC", "HR/HC"]) if with_corr else None
        )
        return io.write_regime_series(
            dates, probs, oos, risk, corr, four, tmp_path / "reg.csv"
        )

    def test_empty_cells_before_window(self, tmp_path):
        lines = read(self.make(tmp_path, with_corr=False)).splitlines()
        assert lines[0] == (
            "date,prob_predicted,prob_filtered,prob_smoothed,prob_oos,"
            "label_risk,label_corr,four_state"
        )
        first = lines[1].split(",")
        assert first[4] == "" and first[6] == "" and first[7] == ""
        third = lines[3].split(",")
        assert float(third[4]) == 0.9 and third[5] == "high"

    def test_four_state_cells(self, tmp_path):
        lines = read(self.make(tmp_path, with_corr=True)).splitlines()
        assert lines[1].split(",")[7] == "LR/LC"
        assert lines[3].split(",")[6] == "high"
        assert lines[3].split(",")[7] == "HR/HC"


class TestPredictionWriters:
    def test_look_ahead_flag(self, tmp_path):
        frame = pd.DataFrame(
            [[0.1, 0.2]], index=pd.DatetimeIndex(["2020-01-31"]), columns=["a", "b"]
        )
        flagged = read(
            io.write_predictions(ForecastSet(frame, look_ahead=True), tmp_path / "p1.csv")
        ).splitlines()
        clean = read(
            io.write_predictions(ForecastSet(frame), tmp_path / "p2.csv")
        ).splitlines()
        assert flagged[0] == "date,asset,prediction,look_ahead_flag"
        assert flagged[1] == "2020-01-31,a,0.1,1"
        assert clean[2] == "2020-01-31,b,0.2,0"

    def test_ic(self, tmp_path):
        series = pd.Series([0.25, -0.5], index=pd.DatetimeIndex(["2020-01-31", "2020-02-28"]))
        lines = read(io.write_ic(series, tmp_path / "ic.csv")).splitlines()
        assert lines == ["date,ic", "2020-01-31,0.25", "2020-02-28,-0.5"]


class TestPortfolioWriters:
    def test_weights_flags_joined(self, tmp_path):
        rows = [
            (dt.date(2020, 1, 31), "a", 0.6, "min_variance", ()),
            (dt.date(2020, 1, 31), "b", 0.4, "min_variance", ("psd_repair", "look_ahead_alpha")),
        ]
        lines = read(io.write_weights(rows, tmp_path / "w.csv")).splitlines()
        assert lines[0] == "date,asset,weight,strategy,flags"
        assert lines[1] == "2020-01-31,a,0.6,min_variance,"
        assert lines[2] == "2020-01-31,b,0.4,min_variance,psd_repair|look_ahead_alpha"

    def test_wealth(self, tmp_path):
        series = pd.Series(
            [1.0, 1.01], index=pd.DatetimeIndex(["2020-01-31", "2020-02-03"]), name="wealth"
        )
        lines = read(io.write_wealth(series, tmp_path / "w.csv")).splitlines()
        assert lines == ["date,wealth", "2020-01-31,1.0", "2020-02-03,1.01"]

    def test_summary_columns(self, tmp_path):
        metrics = StrategyMetrics(
            ann_return=0.05,
            ann_vol=0.1,
            sharpe=0.5,
            max_drawdown=0.2,
            realized_cvar=0.08,
            diversification_ratio=1.4,
            wptd=0.3,
        )
        lines = read(io.write_summary({"risk_parity": metrics}, tmp_path / "s.csv")).splitlines()
        assert lines[0] == (
            "strategy,ann_return,ann_vol,sharpe,max_drawdown,"
            "realized_cvar,diversification_ratio,wptd"
        )
        assert lines[1] == "risk_parity,0.05,0.1,0.5,0.2,0.08,1.4,0.3"

    def test_breakdown(self, tmp_path):
        rows = [("equal_weight", "HR/HC", -0.12), ("equal_weight", "LR/LC", 0.08)]
        lines = read(io.write_breakdown(rows, tmp_path / "b.csv")).splitlines()
        assert lines == [
            "strategy,regime,ann_return",
            "equal_weight,HR/HC,-0.12",
            "equal_weight,LR/LC,0.08",
        ]


class TestClusterWriters:
    def test_linkage_names(self, tmp_path):
        linkage = np.array([[0.0, 1.0, 0.1, 2.0], [2.0, 3.0, 0.9, 3.0]])
        lines = read(
            io.write_linkage(linkage, ("ew", "mv", "rp"), tmp_path / "l.csv")
        ).splitlines()
        assert lines[0] == "step,left,right,distance,size"
        assert lines[1] == "0,ew,mv,0.1,2"
        assert lines[2] == "1,rp,cluster_0,0.9,3"

    def test_eigenvalue_ratios(self, tmp_path):
        lines = read(
            io.write_eigenvalue_ratios([0.7, 0.2, 0.1], tmp_path / "e.csv")
        ).splitlines()
        assert lines == ["rank,ratio", "1,0.7", "2,0.2", "3,0.1"]


class TestPlumbing:
    def test_nested_directories_created(self, tmp_path):
        target = tmp_path / "deep" / "er" / "w.csv"
        series = pd.Series([1.0], index=pd.DatetimeIndex(["2020-01-31"]))
        assert io.write_wealth(series, target) == target
        assert target.is_file()

    def test_all_writers_deterministic(self, tmp_path):
        series = pd.Series([1.0, 2.0], index=pd.DatetimeIndex(["2020-01-31", "2020-02-28"]))
        assert_deterministic(lambda p: io.write_wealth(series, p), tmp_path / "a.csv")
        assert_deterministic(lambda p: io.write_ic(series, p), tmp_path / "b.csv")
        rows = [(dt.date(2020, 1, 31), "a", 1.0, "fixed", ())]
        assert_deterministic(lambda p: io.write_weights(rows, p), tmp_path / "c.csv")
