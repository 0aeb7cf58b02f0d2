"""Batch command-line front end for the full pipeline.

Subcommands: ``fit``, ``forecast``, ``regimes``, ``allocate``, ``backtest``,
``report``. Settings resolve in three layers: package defaults, then an
optional key=value config file, then flags passed explicitly on the command
line. The resolved configuration is echoed to ``<out>/run_config.txt`` so
every run leaves a self-describing record, and identical configurations
rewrite identical bytes. Exit codes: 0 ok, 2 config error, 3 data error,
4 numerical failure; errors print one machine-parsable line on stderr.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from . import io
from .alphas import cross_sectional_ic, naive_forecasts
from .backtest import (
    ALPHA_MODELS,
    BacktestConfig,
    allocate_once,
    cluster_strategies,
    derive_seed,
    monthly_returns,
    performance_metrics,
    regime_breakdown,
    walk_forward,
)
from .dependence import empirical_tail_matrix
from .errors import (
    BadConfigValue,
    ConfigError,
    DataError,
    InsufficientHistory,
    MissingInputFile,
    MissingValue,
    NumericalError,
    SeriesTooShort,
    UnknownAsset,
    UnknownConfigKey,
)
from .panel import ReturnPanel, load_panel, month_ends
from .regimes import fit_ms, four_state, label_regimes, oos_regime_probs
from .scenarios import fit_joint, forecast_risk, simulate_scenarios
from .univariate import filter_residuals

__all__ = ["main", "build_parser", "read_config", "resolve_config", "DEFAULTS"]

DEFAULTS = {
    "returns": None,
    "kind": "returns",
    "out": "out",
    "seed": None,
    "alpha": 0.95,
    "horizon": 21,
    "paths": 10000,
    "threads": 1,
    "risk_model": "rolling_1y",
    "strategies": "min_variance",
    "alpha_model": None,
    "weights": None,
    "fixed_weights": None,
    "tc_bps": 0.0,
    "risk_free": 0.0,
    "window": "expanding",
    "min_days": 1260,
    "min_window": 60,
    "y_risk": None,
    "driver": None,
    "y_corr": None,
    "labels": None,
}

_INT_KEYS = {"seed", "horizon", "paths", "threads", "min_days", "min_window"}
_FLOAT_KEYS = {"alpha", "tc_bps", "risk_free"}

# commands that draw Monte Carlo scenarios and therefore need a seed
_SIMULATING = ("allocate", "backtest", "report")


def read_config(path) -> dict:
    """Parse a key=value config file; '#' starts a comment."""
    p = Path(path)
    if not p.is_file():
        raise MissingInputFile(f"config file not found: {p}")
    out: dict = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise BadConfigValue(f"{p}:{lineno}: expected key=value, got {raw.strip()!r}")
        if key not in DEFAULTS:
            raise UnknownConfigKey(f"{p}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def _coerce(key: str, value: str):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise BadConfigValue(f"{key} must be numeric, got {value!r}") from None
    return value


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then config-file values, then explicitly passed flags."""
    cfg = dict(DEFAULTS)
    if args.config is not None:
        cfg.update(read_config(args.config))
    for key, value in vars(args).items():
        if key not in ("command", "config"):
            cfg[key] = value
    _validate(cfg, args.command)
    return cfg


def _validate(cfg: dict, command: str) -> None:
    if cfg["threads"] < 1:
        raise BadConfigValue(f"threads must be at least 1, got {cfg['threads']}")
    if cfg["kind"] not in ("returns", "prices"):
        raise BadConfigValue(f"kind must be 'returns' or 'prices', got {cfg['kind']!r}")
    if cfg["window"] not in ("expanding", "rolling"):
        raise BadConfigValue(
            f"window must be 'expanding' or 'rolling', got {cfg['window']!r}"
        )
    if cfg["alpha_model"] not in (None, *ALPHA_MODELS):
        raise BadConfigValue(
            f"alpha_model must be one of {ALPHA_MODELS}, got {cfg['alpha_model']!r}"
        )
    if cfg["returns"] is None:
        raise BadConfigValue("a returns file is required (--returns or config key 'returns')")
    for key in ("returns", "labels"):
        if cfg[key] is not None and not Path(cfg[key]).is_file():
            raise MissingInputFile(f"{key} file not found: {cfg[key]}")
    stochastic = command == "forecast" or (
        command in _SIMULATING and cfg["risk_model"] == "garch_dcc_copula"
    )
    if stochastic and cfg["seed"] is None:
        raise BadConfigValue(f"{command} draws simulations with this config; --seed is required")


def _echo_config(cfg: dict, command: str, out_dir: Path) -> None:
    lines = [f"command={command}"]
    for key in sorted(cfg):
        value = cfg[key]
        lines.append(f"{key}=" if value is None else f"{key}={value}")
    (out_dir / "run_config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_returns(cfg: dict) -> ReturnPanel:
    return load_panel(cfg["returns"], kind=cfg["kind"])


def _parse_floats(text, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in str(text).split(","))
    except ValueError:
        raise BadConfigValue(f"{key} must be comma-separated numbers, got {text!r}") from None


def _strategy_list(cfg: dict) -> list[str]:
    names = [tok.strip() for tok in str(cfg["strategies"]).split(",") if tok.strip()]
    if not names:
        raise BadConfigValue("strategies must name at least one allocator")
    return names


def _backtest_config(cfg: dict, strategy: str) -> BacktestConfig:
    fixed = cfg["fixed_weights"]
    if strategy == "fixed" and fixed is None:
        raise BadConfigValue("the fixed strategy requires the fixed_weights config key")
    return BacktestConfig(
        strategy=strategy,
        risk_model=cfg["risk_model"],
        alpha_model=cfg["alpha_model"],
        alpha=cfg["alpha"],
        seed=0 if cfg["seed"] is None else cfg["seed"],
        horizon=cfg["horizon"],
        n_paths=cfg["paths"],
        tc_bps=cfg["tc_bps"],
        risk_free=cfg["risk_free"],
        fixed_weights=_parse_floats(fixed, "fixed_weights") if strategy == "fixed" else None,
    )


def _date_index(frame: pd.DataFrame, path) -> pd.DatetimeIndex:
    try:
        return pd.DatetimeIndex(pd.to_datetime(frame.iloc[:, 0]))
    except (ValueError, TypeError):
        raise DataError(f"{path}: first column must hold ISO dates") from None


def _read_labels(path) -> pd.Series:
    frame = pd.read_csv(path)
    if frame.shape[1] != 2:
        raise DataError(f"{path}: labels file needs exactly two columns, date and label")
    return pd.Series(
        frame.iloc[:, 1].astype(str).to_numpy(), index=_date_index(frame, path)
    )


def _read_series(path) -> pd.DataFrame:
    """Date-indexed numeric series; unlike returns, values are unbounded."""
    frame = pd.read_csv(path)
    if frame.shape[1] < 2:
        raise DataError(f"{path}: header must be 'date,<series1>,...'")
    idx = _date_index(frame, path)
    data = frame.iloc[:, 1:]
    try:
        values = data.to_numpy(dtype=float)
    except (ValueError, TypeError):
        raise MissingValue(f"{path}: series columns must be numeric") from None
    if not np.all(np.isfinite(values)):
        raise MissingValue(f"{path}: series contain non-finite values")
    return pd.DataFrame(values, index=idx, columns=list(data.columns))


def _series_column(frame: pd.DataFrame, name: str) -> np.ndarray:
    if name not in frame.columns:
        raise UnknownAsset(f"column {name!r} not in the series file")
    return frame[name].to_numpy()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_fit(cfg: dict, out: Path) -> None:
    panel = _load_returns(cfg)
    model = fit_joint(panel, window=cfg["window"], min_days=cfg["min_days"])
    fitted = panel if cfg["window"] == "expanding" else panel.tail(cfg["min_days"])
    logliks = {
        name: filter_residuals(params, fitted.column(name)).loglik
        for name, params in zip(model.assets, model.marginals)
    }
    io.write_joint_model(model, logliks, out / "model.json")


def cmd_forecast(cfg: dict, out: Path) -> None:
    panel = _load_returns(cfg)
    if cfg["weights"] is None:
        weights = np.full(panel.n_assets, 1.0 / panel.n_assets)
    else:
        weights = np.asarray(_parse_floats(cfg["weights"], "weights"))
    index = {d: i for i, d in enumerate(panel.dates)}
    dates = [d for d in month_ends(panel) if index[d] + 1 >= cfg["min_days"]]
    if not dates:
        raise InsufficientHistory(
            f"no month-end has the {cfg['min_days']} days the joint model needs"
        )
    forecasts = []
    for date in dates:
        model = fit_joint(panel.through(date), window=cfg["window"], min_days=cfg["min_days"])
        scen = simulate_scenarios(
            model,
            horizon=cfg["horizon"],
            n_paths=cfg["paths"],
            seed=derive_seed(cfg["seed"], date),
        )
        forecasts.append(forecast_risk(model, scen, weights, alpha=cfg["alpha"]))
    io.write_risk_forecasts(dates, forecasts, out / "risk.csv")
    io.write_forecast_correlations(
        dates, [f.corr for f in forecasts], panel.assets, out / "correlations.csv"
    )
    if cfg["alpha_model"] is not None:
        _write_alpha_outputs(panel, cfg, out)


def _write_alpha_outputs(panel: ReturnPanel, cfg: dict, out: Path) -> None:
    frame = panel.to_frame()
    forecast_set = naive_forecasts(frame, mode=cfg["alpha_model"])
    io.write_predictions(forecast_set, out / "predictions.csv")
    stamps = [pd.Timestamp(d) for d in month_ends(panel)]
    pairs = [(a, b) for a, b in zip(stamps, stamps[1:]) if a in forecast_set.predictions.index]
    if not pairs:
        raise SeriesTooShort("need two month-ends after the first prediction date")
    predicted = pd.DataFrame([forecast_set.predictions.loc[a] for a, _ in pairs])
    realized = pd.DataFrame(
        [(1.0 + frame[(frame.index > a) & (frame.index <= b)]).prod() - 1.0 for a, b in pairs],
        index=predicted.index,
    )
    series, _ = cross_sectional_ic(predicted, realized)
    io.write_ic(series, out / "ic.csv")


def cmd_regimes(cfg: dict, out: Path) -> None:
    if cfg["y_risk"] is None or cfg["driver"] is None:
        raise BadConfigValue(
            "regimes needs config keys y_risk and driver naming columns of the series file"
        )
    frame = _read_series(cfg["returns"])
    y = _series_column(frame, cfg["y_risk"])
    x = _series_column(frame, cfg["driver"])
    fit = fit_ms(y, x)
    oos = oos_regime_probs(y, x, min_window=cfg["min_window"])
    label_risk = label_regimes(fit.probs.smoothed)
    label_corr = four = None
    if cfg["y_corr"] is not None:
        corr_fit = fit_ms(_series_column(frame, cfg["y_corr"]), x)
        label_corr = label_regimes(corr_fit.probs.smoothed)
        four = four_state(label_risk, label_corr)
    io.write_regime_series(
        frame.index, fit.probs, oos, label_risk, label_corr, four, out / "regimes.csv"
    )


def cmd_allocate(cfg: dict, out: Path) -> None:
    panel = _load_returns(cfg)
    names = _strategy_list(cfg)
    configs = [_backtest_config(cfg, s) for s in names]
    with ThreadPoolExecutor(max_workers=cfg["threads"]) as pool:
        decisions = list(pool.map(lambda c: allocate_once(panel, c), configs))
    rows = []
    for name, (date, w, _) in zip(names, decisions):
        for asset, value in zip(panel.assets, w.values):
            rows.append((date, asset, value, name, w.flags))
    io.write_weights(rows, out / "weights.csv")


def cmd_backtest(cfg: dict, out: Path) -> None:
    panel = _load_returns(cfg)
    names = _strategy_list(cfg)
    configs = [_backtest_config(cfg, s) for s in names]
    with ThreadPoolExecutor(max_workers=cfg["threads"]) as pool:
        results = list(pool.map(lambda c: walk_forward(panel, c), configs))
    metrics = {}
    for name, result in zip(names, results):
        io.write_wealth(result.wealth, out / f"wealth_{name}.csv")
        metrics[name] = (
            result.metrics if result.metrics is not None else performance_metrics(result)
        )
    io.write_summary(metrics, out / "summary.csv")
    if cfg["labels"] is not None:
        labels = _read_labels(cfg["labels"])
        rows = []
        for name, result in zip(names, results):
            for regime, value in regime_breakdown(result, labels).items():
                rows.append((name, regime, value))
        io.write_breakdown(rows, out / "breakdown.csv")


def cmd_report(cfg: dict, out: Path) -> None:
    panel = _load_returns(cfg)
    pearson = np.atleast_2d(np.corrcoef(panel.values, rowvar=False))
    tail = empirical_tail_matrix(panel.values)
    io.write_dependence_matrix(panel.assets, pearson, tail, out / "dependence.csv")
    names = _strategy_list(cfg)
    if len(names) < 2:
        return
    configs = [_backtest_config(cfg, s) for s in names]
    with ThreadPoolExecutor(max_workers=cfg["threads"]) as pool:
        results = list(pool.map(lambda c: walk_forward(panel, c), configs))
    monthly = pd.concat(
        [monthly_returns(r.wealth).rename(n) for n, r in zip(names, results)],
        axis=1,
        join="inner",
    )
    cluster = cluster_strategies(monthly)
    io.write_linkage(cluster.linkage, cluster.names, out / "cluster_linkage.csv")
    io.write_eigenvalue_ratios(cluster.eigenvalue_ratios, out / "eigenvalue_ratios.csv")


COMMANDS = {
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "regimes": cmd_regimes,
    "allocate": cmd_allocate,
    "backtest": cmd_backtest,
    "report": cmd_report,
}

_BLURBS = {
    "fit": "Fit the joint volatility, correlation and copula model; write model.json.",
    "forecast": "Refit at each eligible month-end and write simulated risk forecasts.",
    "regimes": "Fit regime models and write the four-probability series with labels.",
    "allocate": "Compute one set of current weights per requested strategy.",
    "backtest": "Walk-forward monthly backtest; writes wealth, summary and breakdown files.",
    "report": "Write the dependence matrix and strategy clustering outputs.",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynalloc",
        description="Scenario-based risk forecasting and dynamic allocation tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, blurb in _BLURBS.items():
        _add_flags(sub.add_parser(name, help=blurb, description=blurb))
    return parser


def _add_flags(p: argparse.ArgumentParser) -> None:
    # SUPPRESS keeps unpassed flags out of the namespace so the config file
    # stays authoritative for them; defaults are stated in the help text.
    absent = argparse.SUPPRESS
    p.add_argument(
        "--config", default=None, metavar="PATH",
        help="key=value config file; explicit flags override it (default: none)",
    )
    p.add_argument(
        "--returns", default=absent, metavar="PATH",
        help="CSV panel: a date column then one column per asset (default: from config)",
    )
    p.add_argument(
        "--seed", type=int, default=absent, metavar="N",
        help="master seed, required by commands that simulate (default: none)",
    )
    p.add_argument(
        "--alpha", type=float, default=absent, metavar="A",
        help="tail probability level for VaR and CVaR (default: 0.95)",
    )
    p.add_argument(
        "--horizon", type=int, default=absent, metavar="DAYS",
        help="simulation horizon in trading days (default: 21)",
    )
    p.add_argument(
        "--paths", type=int, default=absent, metavar="N",
        help="simulated paths per forecast (default: 10000)",
    )
    p.add_argument(
        "--threads", type=int, default=absent, metavar="N",
        help="worker cap for independent strategies; never changes results (default: 1)",
    )
    p.add_argument(
        "--out", default=absent, metavar="DIR",
        help="output directory, created if missing (default: out)",
    )


def _fail(category: str, err: Exception, code: int) -> int:
    message = " ".join(str(err).split())
    print(f"error: {category}: {type(err).__name__}: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        _echo_config(cfg, args.command, out)
        COMMANDS[args.command](cfg, out)
    except ConfigError as err:
        return _fail("config", err, 2)
    except DataError as err:
        return _fail("data", err, 3)
    except NumericalError as err:
        return _fail("numerical", err, 4)
    return 0


if __name__ == "__main__":
    sys.exit(main())
