"""Deterministic writers for every file the command-line tools emit.

All numbers are serialized with shortest round-trip ``repr`` so identical
inputs always produce identical bytes; dates are ISO-8601.
"""

from __future__ import annotations

import datetime as dt
import json
from pathlib import Path

import numpy as np
import pandas as pd

__all__ = [
    "write_joint_model",
    "write_dependence_matrix",
    "write_risk_forecasts",
    "write_forecast_correlations",
    "write_regime_series",
    "write_predictions",
    "write_ic",
    "write_weights",
    "write_wealth",
    "write_summary",
    "write_breakdown",
    "write_linkage",
    "write_eigenvalue_ratios",
]

SUMMARY_COLUMNS = (
    "ann_return",
    "ann_vol",
    "sharpe",
    "max_drawdown",
    "realized_cvar",
    "diversification_ratio",
    "wptd",
)


def _num(x) -> str:
    return repr(float(x))


def _day(d) -> str:
    if isinstance(d, dt.date) and not isinstance(d, dt.datetime):
        return d.isoformat()
    return pd.Timestamp(d).date().isoformat()


def _write(path, lines) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_joint_model(model, logliks, path) -> Path:
    """Fitted staged model as JSON keyed by stage.

    ``logliks`` maps asset name to its marginal filter log-likelihood.
    """
    doc = {
        "assets": list(model.assets),
        "window": {
            "kind": model.window_kind,
            "start": _day(model.window_start),
            "end": _day(model.window_end),
        },
        "marginals": {
            name: {
                "mu": p.mu,
                "phi": p.phi,
                "theta": p.theta,
                "alpha0": p.alpha0,
                "alpha1": p.alpha1,
                "beta1": p.beta1,
                "gamma": p.gamma,
                "loglik": float(logliks[name]),
            }
            for name, p in zip(model.assets, model.marginals)
        },
        "dcc": {
            "a": model.dcc.a,
            "b": model.dcc.b,
            "rbar": model.dcc.rbar.tolist(),
        },
        "copula": {
            "nu": model.copula.nu,
            "corr": model.copula.corr.tolist(),
        },
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_dependence_matrix(assets, pearson, tail, path) -> Path:
    """Square matrix CSV: lower triangle Pearson rho, upper triangle lambda."""
    pearson = np.asarray(pearson, dtype=float)
    tail = np.asarray(tail, dtype=float)
    mixed = np.where(np.tri(len(assets), k=-1, dtype=bool), pearson, tail)
    np.fill_diagonal(mixed, 1.0)
    lines = ["," + ",".join(assets)]
    for name, row in zip(assets, mixed):
        lines.append(name + "," + ",".join(_num(v) for v in row))
    return _write(path, lines)


def write_risk_forecasts(dates, forecasts, path) -> Path:
    """Monthly portfolio risk: date,cvar,vol,wpc."""
    lines = ["date,cvar,vol,wpc"]
    for d, f in zip(dates, forecasts):
        lines.append(f"{_day(d)},{_num(f.cvar)},{_num(f.vol)},{_num(f.wpc)}")
    return _write(path, lines)


def write_forecast_correlations(dates, mats, assets, path) -> Path:
    """Long-format forecast correlations: date,asset_i,asset_j,corr."""
    lines = ["date,asset_i,asset_j,corr"]
    for d, m in zip(dates, mats):
        m = np.asarray(m, dtype=float)
        for i, a in enumerate(assets):
            for j, b in enumerate(assets):
                if i < j:
                    lines.append(f"{_day(d)},{a},{b},{_num(m[i, j])}")
    return _write(path, lines)


def write_regime_series(dates, probs, oos, label_risk, label_corr, four, path) -> Path:
    """Regime probabilities and labels, one row per date.

    ``label_corr`` and ``four`` may be None; their cells are left empty.
    """
    header = (
        "date,prob_predicted,prob_filtered,prob_smoothed,prob_oos,"
        "label_risk,label_corr,four_state"
    )
    lines = [header]
    for i, d in enumerate(dates):
        oos_cell = "" if oos is None or np.isnan(oos[i]) else _num(oos[i])
        corr_cell = "" if label_corr is None else str(label_corr[i])
        four_cell = "" if four is None else str(four[i])
        lines.append(
            f"{_day(d)},{_num(probs.predicted[i])},{_num(probs.filtered[i])},"
            f"{_num(probs.smoothed[i])},{oos_cell},"
            f"{label_risk[i]},{corr_cell},{four_cell}"
        )
    return _write(path, lines)


def write_predictions(forecast_set, path) -> Path:
    """Alpha forecasts in long format: date,asset,prediction,look_ahead_flag."""
    frame = forecast_set.predictions
    flag = "1" if forecast_set.look_ahead else "0"
    lines = ["date,asset,prediction,look_ahead_flag"]
    for d, row in frame.iterrows():
        for asset in frame.columns:
            lines.append(f"{_day(d)},{asset},{_num(row[asset])},{flag}")
    return _write(path, lines)


def write_ic(series, path) -> Path:
    lines = ["date,ic"]
    for d, v in series.items():
        lines.append(f"{_day(d)},{_num(v)}")
    return _write(path, lines)


def write_weights(rows, path) -> Path:
    """Allocations in long format: date,asset,weight,strategy,flags.

    ``rows`` yields (date, asset, weight, strategy, flags-tuple); flags are
    joined with '|'.
    """
    lines = ["date,asset,weight,strategy,flags"]
    for d, asset, weight, strategy, flags in rows:
        lines.append(f"{_day(d)},{asset},{_num(weight)},{strategy},{'|'.join(flags)}")
    return _write(path, lines)


def write_wealth(series, path) -> Path:
    lines = ["date,wealth"]
    for d, v in series.items():
        lines.append(f"{_day(d)},{_num(v)}")
    return _write(path, lines)


def write_summary(metrics_by_strategy, path) -> Path:
    """One row per strategy with every headline metric."""
    lines = ["strategy," + ",".join(SUMMARY_COLUMNS)]
    for name, m in metrics_by_strategy.items():
        cells = ",".join(_num(getattr(m, c)) for c in SUMMARY_COLUMNS)
        lines.append(f"{name},{cells}")
    return _write(path, lines)


def write_breakdown(rows, path) -> Path:
    """Per-regime annualized returns: strategy,regime,ann_return."""
    lines = ["strategy,regime,ann_return"]
    for strategy, regime, value in rows:
        lines.append(f"{strategy},{regime},{_num(value)}")
    return _write(path, lines)


def write_linkage(linkage, names, path) -> Path:
    """Hierarchical merge steps: step,left,right,distance,size.

    ``left``/``right`` below ``len(names)`` are leaf strategy names;
    larger ids refer to the cluster formed at step ``id - len(names)``.
    """
    k = len(names)

    def node(i: int) -> str:
        return names[i] if i < k else f"cluster_{i - k}"

    lines = ["step,left,right,distance,size"]
    for step, (a, b, dist, size) in enumerate(np.asarray(linkage, dtype=float)):
        lines.append(
            f"{step},{node(int(a))},{node(int(b))},{_num(dist)},{int(size)}"
        )
    return _write(path, lines)


def write_eigenvalue_ratios(ratios, path) -> Path:
    lines = ["rank,ratio"]
    for rank, value in enumerate(np.asarray(ratios, dtype=float), start=1):
        lines.append(f"{rank},{_num(value)}")
    return _write(path, lines)
