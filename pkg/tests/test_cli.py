"""Command-line interface: exit codes, config precedence, file determinism."""

import hashlib
import json
import re

import numpy as np
import pytest

from dynalloc import cli
from dynalloc.cli import main
from dynalloc.errors import NonConvergence
from synthetic import business_days, sim_joint

ERROR_LINE = re.compile(r"^error: (config|data|numerical): [A-Za-z]+: .+$")

COMMON_FLAGS = (
    "--config", "--returns", "--seed", "--alpha",
    "--horizon", "--paths", "--threads", "--out",
)


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().err


def write_csv(path, values, names):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    dates = business_days(len(values))
    with open(path, "w") as handle:
        handle.write("date," + ",".join(names) + "\n")
        for d, row in zip(dates, values):
            cells = ",".join(repr(float(v)) for v in row)
            handle.write(f"{d.isoformat()},{cells}\n")
    return str(path)


def file_hashes(folder, skip=()):
    return {
        p.name: hashlib.md5(p.read_bytes()).hexdigest()
        for p in sorted(folder.iterdir())
        if p.name not in skip
    }


@pytest.fixture(scope="module")
def panel_csv(tmp_path_factory):
    rng = np.random.default_rng(3)
    cov = np.array([
        [1.0, 0.3, 0.1, 0.0],
        [0.3, 1.0, 0.2, 0.1],
        [0.1, 0.2, 1.0, 0.4],
        [0.0, 0.1, 0.4, 1.0],
    ]) * 1e-4
    values = rng.multivariate_normal([4e-4, 3e-4, 2e-4, 1e-4], cov, size=800)
    path = tmp_path_factory.mktemp("panels") / "panel.csv"
    return write_csv(path, values, ["stocks", "bonds", "commodities", "alts"])


@pytest.fixture(scope="module")
def garch_csv(tmp_path_factory):
    values = sim_joint(
        1302, 7,
        marginals=[
            dict(mu=0.03, phi=0.1, theta=0.0, alpha0=0.05, alpha1=0.07, beta1=0.90),
            dict(mu=0.02, phi=0.0, theta=0.1, alpha0=0.03, alpha1=0.05, beta1=0.92),
        ],
        a=0.03, b=0.94,
        rbar=[[1.0, 0.5], [0.5, 1.0]],
        cop_corr=[[1.0, 0.5], [0.5, 1.0]],
        nu=8,
    ) / 100.0
    path = tmp_path_factory.mktemp("panels") / "garch.csv"
    return write_csv(path, values, ["a0", "a1"])


@pytest.fixture(scope="module")
def series_csv(tmp_path_factory):
    rng = np.random.default_rng(5)
    state = np.zeros(200, dtype=int)
    for t in range(1, 200):
        stay = 0.97 if state[t - 1] == 0 else 0.92
        state[t] = state[t - 1] if rng.random() < stay else 1 - state[t - 1]
    y = rng.normal(0.0, np.where(state == 1, 4.0, 1.0))
    driver = 0.5 * np.abs(np.roll(y, 1))
    driver[0] = 0.0
    path = tmp_path_factory.mktemp("panels") / "series.csv"
    return write_csv(path, np.column_stack([y, driver]), ["rv", "driver"])


def config_file(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestParsing:
    @pytest.mark.parametrize("command", sorted(cli.COMMANDS))
    def test_help_lists_every_flag_with_default(self, capsys, command):
        with pytest.raises(SystemExit) as exc:
            main([command, "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for flag in COMMON_FLAGS:
            assert flag in text
        assert text.count("(default:") >= len(COMMON_FLAGS)

    def test_bad_flag_value_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["fit", "--seed", "notanint"])
        assert exc.value.code == 2

    def test_config_comments_and_blanks(self, tmp_path):
        path = config_file(tmp_path, "# comment\n\nalpha=0.9  # inline\nseed=4\n")
        assert cli.read_config(path) == {"alpha": 0.9, "seed": 4}

    def test_unknown_config_key(self, capsys, tmp_path, panel_csv):
        path = config_file(tmp_path, "bogus=1\n")
        code, err = run(capsys, "fit", "--config", path, "--returns", panel_csv)
        assert code == 2
        assert "bogus" in err and ERROR_LINE.match(err.strip())

    def test_non_numeric_config_value(self, capsys, tmp_path, panel_csv):
        path = config_file(tmp_path, "alpha=wide\n")
        code, err = run(capsys, "fit", "--config", path, "--returns", panel_csv)
        assert code == 2 and "alpha" in err

    def test_config_line_without_equals(self, capsys, tmp_path, panel_csv):
        path = config_file(tmp_path, "alpha 0.9\n")
        code, err = run(capsys, "fit", "--config", path, "--returns", panel_csv)
        assert code == 2


class TestExitCodes:
    def test_missing_returns_file(self, capsys, tmp_path):
        code, err = run(
            capsys, "backtest", "--returns", "/no/such/panel.csv", "--out", str(tmp_path / "o")
        )
        assert code == 2
        assert "/no/such/panel.csv" in err
        assert ERROR_LINE.match(err.strip())

    def test_missing_config_file(self, capsys, tmp_path):
        code, err = run(capsys, "backtest", "--config", "/no/such/run.cfg")
        assert code == 2 and "/no/such/run.cfg" in err

    def test_returns_required(self, capsys):
        code, err = run(capsys, "backtest")
        assert code == 2 and "returns" in err

    def test_malformed_returns_is_data_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("date,a,b\n2020-01-02,0.01,oops\n", encoding="utf-8")
        code, err = run(capsys, "backtest", "--returns", str(bad), "--out", str(tmp_path / "o"))
        assert code == 3
        assert ERROR_LINE.match(err.strip())

    def test_numerical_error_maps_to_4(self, capsys, tmp_path, panel_csv, monkeypatch):
        def explode(cfg, out):
            raise NonConvergence("optimizer stalled\nafter 7 restarts")

        monkeypatch.setitem(cli.COMMANDS, "fit", explode)
        code, err = run(
            capsys, "fit", "--returns", panel_csv, "--out", str(tmp_path / "o")
        )
        assert code == 4
        assert err.strip() == "error: numerical: NonConvergence: optimizer stalled after 7 restarts"

    def test_bad_threads(self, capsys, tmp_path, panel_csv):
        code, err = run(
            capsys, "backtest", "--returns", panel_csv, "--threads", "0",
            "--out", str(tmp_path / "o"),
        )
        assert code == 2 and "threads" in err


class TestSeedPolicy:
    def test_forecast_requires_seed(self, capsys, tmp_path, panel_csv):
        code, err = run(capsys, "forecast", "--returns", panel_csv, "--out", str(tmp_path / "o"))
        assert code == 2 and "seed" in err

    def test_garch_allocate_requires_seed(self, capsys, tmp_path, garch_csv):
        path = config_file(tmp_path, "risk_model=garch_dcc_copula\n")
        code, err = run(
            capsys, "allocate", "--config", path, "--returns", garch_csv,
            "--out", str(tmp_path / "o"),
        )
        assert code == 2 and "seed" in err

    def test_sample_model_allocate_needs_no_seed(self, capsys, tmp_path, panel_csv):
        code, err = run(
            capsys, "allocate", "--returns", panel_csv, "--out", str(tmp_path / "o")
        )
        assert code == 0 and err == ""


class TestConfigPrecedence:
    def test_flag_beats_config_beats_default(self, capsys, tmp_path, panel_csv):
        path = config_file(tmp_path, "alpha=0.9\nstrategies=equal_weight\n")
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert run(capsys, "allocate", "--config", path, "--returns", panel_csv,
                   "--alpha", "0.99", "--out", str(out1))[0] == 0
        assert run(capsys, "allocate", "--config", path, "--returns", panel_csv,
                   "--out", str(out2))[0] == 0
        text1 = (out1 / "run_config.txt").read_text()
        text2 = (out2 / "run_config.txt").read_text()
        assert "alpha=0.99" in text1
        assert "alpha=0.9\n" in text2
        assert "horizon=21" in text1

    def test_run_config_records_command_and_empty_seed(self, capsys, tmp_path, panel_csv):
        out = tmp_path / "o"
        assert run(capsys, "allocate", "--returns", panel_csv, "--out", str(out))[0] == 0
        lines = (out / "run_config.txt").read_text().splitlines()
        assert lines[0] == "command=allocate"
        assert "seed=" in lines
        keys = [line.split("=")[0] for line in lines[1:]]
        assert keys == sorted(keys)


class TestAllocate:
    def test_weights_csv(self, capsys, tmp_path, panel_csv):
        path = config_file(tmp_path, "strategies=equal_weight,min_variance\n")
        out = tmp_path / "o"
        code, _ = run(capsys, "allocate", "--config", path, "--returns", panel_csv,
                      "--out", str(out))
        assert code == 0
        lines = (out / "weights.csv").read_text().splitlines()
        assert lines[0] == "date,asset,weight,strategy,flags"
        cells = [line.split(",") for line in lines[1:]]
        assert len(cells) == 8
        for row in cells[:4]:
            assert row[3] == "equal_weight" and float(row[2]) == 0.25
        mv = [float(row[2]) for row in cells if row[3] == "min_variance"]
        assert abs(sum(mv) - 1.0) < 1e-8

    def test_garch_seed_determinism(self, capsys, tmp_path, garch_csv):
        path = config_file(
            tmp_path, "risk_model=garch_dcc_copula\npaths=400\nstrategies=risk_parity\n"
        )
        outs = [tmp_path / name for name in ("o1", "o2", "o3")]
        for out, seed in zip(outs, ("7", "7", "8")):
            code, _ = run(capsys, "allocate", "--config", path, "--returns", garch_csv,
                          "--seed", seed, "--out", str(out))
            assert code == 0
        first = (outs[0] / "weights.csv").read_bytes()
        assert (outs[1] / "weights.csv").read_bytes() == first
        assert (outs[2] / "weights.csv").read_bytes() != first


class TestBacktest:
    def test_outputs_and_idempotence(self, capsys, tmp_path, panel_csv):
        path = config_file(tmp_path, "strategies=equal_weight,min_variance\n")
        out = tmp_path / "o"
        args = ("backtest", "--config", path, "--returns", panel_csv, "--out", str(out))
        assert run(capsys, *args)[0] == 0
        first = file_hashes(out)
        summary = (out / "summary.csv").read_text().splitlines()
        assert summary[0].startswith("strategy,ann_return,ann_vol,sharpe")
        assert {line.split(",")[0] for line in summary[1:]} == {"equal_weight", "min_variance"}
        assert (out / "wealth_equal_weight.csv").is_file()
        assert (out / "wealth_min_variance.csv").is_file()
        assert run(capsys, *args)[0] == 0
        assert file_hashes(out) == first

    def test_threads_do_not_change_results(self, capsys, tmp_path, panel_csv):
        path = config_file(
            tmp_path, "strategies=equal_weight,min_variance,risk_parity,max_diversification\n"
        )
        out1, out4 = tmp_path / "t1", tmp_path / "t4"
        assert run(capsys, "backtest", "--config", path, "--returns", panel_csv,
                   "--threads", "1", "--out", str(out1))[0] == 0
        assert run(capsys, "backtest", "--config", path, "--returns", panel_csv,
                   "--threads", "4", "--out", str(out4))[0] == 0
        skip = ("run_config.txt",)
        assert file_hashes(out1, skip) == file_hashes(out4, skip)

    def test_breakdown_with_labels(self, capsys, tmp_path, panel_csv):
        dates = business_days(800)
        labels = tmp_path / "labels.csv"
        with open(labels, "w") as handle:
            handle.write("date,label\n")
            for d in dates:
                handle.write(f"{d.isoformat()},{'high' if d.month % 2 else 'low'}\n")
        path = config_file(
            tmp_path, f"strategies=equal_weight,min_variance\nlabels={labels}\n"
        )
        out = tmp_path / "o"
        assert run(capsys, "backtest", "--config", path, "--returns", panel_csv,
                   "--out", str(out))[0] == 0
        lines = (out / "breakdown.csv").read_text().splitlines()
        assert lines[0] == "strategy,regime,ann_return"
        rows = [line.split(",") for line in lines[1:]]
        assert {row[0] for row in rows} == {"equal_weight", "min_variance"}
        assert {row[1] for row in rows} == {"high", "low"}
        for row in rows:
            float(row[2])

    def test_fixed_strategy_needs_weights(self, capsys, tmp_path, panel_csv):
        path = config_file(tmp_path, "strategies=fixed\n")
        code, err = run(capsys, "backtest", "--config", path, "--returns", panel_csv,
                        "--out", str(tmp_path / "o"))
        assert code == 2 and "fixed_weights" in err


class TestFit:
    def test_model_json(self, capsys, tmp_path, panel_csv):
        path = config_file(tmp_path, "min_days=300\n")
        out = tmp_path / "o"
        assert run(capsys, "fit", "--config", path, "--returns", panel_csv,
                   "--out", str(out))[0] == 0
        doc = json.loads((out / "model.json").read_text())
        assert doc["assets"] == ["stocks", "bonds", "commodities", "alts"]
        assert doc["window"]["kind"] == "expanding"
        assert set(doc["marginals"]) == set(doc["assets"])
        marginal = doc["marginals"]["stocks"]
        assert set(marginal) == {"mu", "phi", "theta", "alpha0", "alpha1", "beta1", "gamma", "loglik"}
        assert np.isfinite(marginal["loglik"])
        assert 0.0 <= doc["dcc"]["a"] < 1.0
        assert len(doc["copula"]["corr"]) == 4


class TestForecast:
    def test_outputs_and_determinism(self, capsys, tmp_path, panel_csv):
        path = config_file(tmp_path, "min_days=720\npaths=200\nalpha_model=short_term\n")
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        for out in (out1, out2):
            assert run(capsys, "forecast", "--config", path, "--returns", panel_csv,
                       "--seed", "3", "--out", str(out))[0] == 0
        risk = (out1 / "risk.csv").read_text().splitlines()
        assert risk[0] == "date,cvar,vol,wpc"
        n_dates = len(risk) - 1
        assert n_dates >= 3
        for line in risk[1:]:
            _, cvar, vol, wpc = line.split(",")
            assert float(vol) > 0 and float(wpc) > 0 and np.isfinite(float(cvar))
        corr = (out1 / "correlations.csv").read_text().splitlines()
        assert len(corr) - 1 == n_dates * 6
        predictions = (out1 / "predictions.csv").read_text().splitlines()
        assert predictions[0] == "date,asset,prediction,look_ahead_flag"
        assert all(line.endswith(",0") for line in predictions[1:])
        ic = (out1 / "ic.csv").read_text().splitlines()
        assert ic[0] == "date,ic" and len(ic) > 1
        skip = ("run_config.txt",)
        assert file_hashes(out1, skip) == file_hashes(out2, skip)

    def test_long_term_predictions_flagged(self, capsys, tmp_path, panel_csv):
        path = config_file(tmp_path, "min_days=770\npaths=100\nalpha_model=long_term\n")
        out = tmp_path / "o"
        assert run(capsys, "forecast", "--config", path, "--returns", panel_csv,
                   "--seed", "3", "--out", str(out))[0] == 0
        predictions = (out / "predictions.csv").read_text().splitlines()
        assert all(line.endswith(",1") for line in predictions[1:])


class TestRegimes:
    def test_series_and_labels(self, capsys, tmp_path, series_csv):
        path = config_file(
            tmp_path, "y_risk=rv\ndriver=driver\ny_corr=rv\nmin_window=190\n"
        )
        out = tmp_path / "o"
        assert run(capsys, "regimes", "--config", path, "--returns", series_csv,
                   "--out", str(out))[0] == 0
        lines = (out / "regimes.csv").read_text().splitlines()
        assert lines[0] == (
            "date,prob_predicted,prob_filtered,prob_smoothed,prob_oos,"
            "label_risk,label_corr,four_state"
        )
        assert len(lines) - 1 == 200
        rows = [line.split(",") for line in lines[1:]]
        for row in rows[:190]:
            assert row[4] == ""
        for row in rows[190:]:
            assert 0.0 <= float(row[4]) <= 1.0
        for row in rows:
            assert row[5] in ("high", "low")
            assert row[6] in ("high", "low")
            assert row[7] in ("HR/HC", "HR/LC", "LR/HC", "LR/LC")
            for cell in row[1:4]:
                assert 0.0 <= float(cell) <= 1.0

    def test_missing_column_keys(self, capsys, tmp_path, series_csv):
        code, err = run(capsys, "regimes", "--returns", series_csv,
                        "--out", str(tmp_path / "o"))
        assert code == 2 and "y_risk" in err

    def test_unknown_column(self, capsys, tmp_path, series_csv):
        path = config_file(tmp_path, "y_risk=nope\ndriver=driver\n")
        code, err = run(capsys, "regimes", "--config", path, "--returns", series_csv,
                        "--out", str(tmp_path / "o"))
        assert code == 3 and "nope" in err


class TestReport:
    def test_dependence_and_clustering(self, capsys, tmp_path, panel_csv):
        path = config_file(tmp_path, "strategies=equal_weight,min_variance,risk_parity\n")
        out = tmp_path / "o"
        assert run(capsys, "report", "--config", path, "--returns", panel_csv,
                   "--out", str(out))[0] == 0
        dep = (out / "dependence.csv").read_text().splitlines()
        assert dep[0] == ",stocks,bonds,commodities,alts"
        assert len(dep) == 5
        linkage = (out / "cluster_linkage.csv").read_text().splitlines()
        assert linkage[0] == "step,left,right,distance,size"
        assert len(linkage) - 1 == 2
        assert int(linkage[-1].split(",")[4]) == 3
        ratios = (out / "eigenvalue_ratios.csv").read_text().splitlines()
        values = [float(line.split(",")[1]) for line in ratios[1:]]
        assert len(values) == 3
        assert abs(sum(values) - 1.0) < 1e-9

    def test_single_strategy_skips_clustering(self, capsys, tmp_path, panel_csv):
        out = tmp_path / "o"
        assert run(capsys, "report", "--returns", panel_csv, "--out", str(out))[0] == 0
        assert (out / "dependence.csv").is_file()
        assert not (out / "cluster_linkage.csv").exists()
        assert not (out / "eigenvalue_ratios.csv").exists()
