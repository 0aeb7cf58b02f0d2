"""Return prediction: variance risk premium, rolling OLS, naive baselines,
cross-sectional information coefficients, and quintile factor portfolios.

Every forecast is causal: the value issued at date t is a function of data
dated t and earlier only. The long-horizon naive baseline deliberately breaks
this and is tagged ``look_ahead=True`` so downstream reports can flag it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import (
    CollinearRegressors,
    InsufficientWindow,
    LengthMismatch,
    MissingValue,
    NoEligibleGroups,
    SeriesTooShort,
    TooFewAssets,
)
from .panel import ReturnPanel

__all__ = [
    "ForecastSet",
    "vrp",
    "rolling_ols_forecast",
    "naive_forecasts",
    "cross_sectional_ic",
    "quintile_ls_portfolio",
]

TRADING_DAYS_PER_YEAR = 252
TRADING_DAYS_PER_MONTH = 21


@dataclass(frozen=True)
class ForecastSet:
    """Per-date, per-asset return predictions.

    Attributes
    ----------
    predictions : pandas.DataFrame
        One row per issue date, one column per asset. The row at date t is
        the prediction for the following period, computed from data dated
        t and earlier (unless ``look_ahead`` says otherwise).
    look_ahead : bool
        True when the construction uses data from after the issue date.
    """

    predictions: pd.DataFrame
    look_ahead: bool = False

    def __post_init__(self):
        if not isinstance(self.predictions, pd.DataFrame):
            raise TypeError("predictions must be a DataFrame")
        if not np.all(np.isfinite(self.predictions.to_numpy())):
            raise MissingValue("predictions contain non-finite values")


def _as_series(x, name: str) -> pd.Series:
    s = pd.Series(x) if not isinstance(x, pd.Series) else x
    vals = s.to_numpy(dtype=float)
    if not np.all(np.isfinite(vals)):
        raise MissingValue(f"{name} contains non-finite values")
    return s.astype(float)


def _as_frame(x, name: str) -> pd.DataFrame:
    if isinstance(x, ReturnPanel):
        x = x.to_frame()
    f = x.to_frame() if isinstance(x, pd.Series) else pd.DataFrame(x)
    if not np.all(np.isfinite(f.to_numpy(dtype=float))):
        raise MissingValue(f"{name} contains non-finite values")
    return f.astype(float)


def vrp(implied_vol, daily_returns, window: int = TRADING_DAYS_PER_MONTH) -> pd.Series:
    """Variance risk premium per observation date of the implied series.

    Parameters
    ----------
    implied_vol : pandas.Series
        Implied volatility index level in annualized vol points (e.g. 20.0
        for 20%), typically sampled at month-ends.
    daily_returns : pandas.Series
        Daily returns of the underlying, decimal fractions.
    window : int
        Trailing trading days defining one "month" of realized variance.

    Returns
    -------
    pandas.Series
        Implied monthly variance minus realized monthly variance, in
        variance-fraction units: (iv/100)^2 * (window/252) - sum(r^2).

    Notes
    -----
    The realized leg uses daily (not intraday) returns; the implied leg is
    de-annualized by window/252 so the two legs are commensurate.
    """
    iv = _as_series(implied_vol, "implied_vol")
    rets = _as_series(daily_returns, "daily_returns")
    if window < 1:
        raise ValueError(f"window must be positive, got {window}")
    ret_dates = rets.index
    sq = rets.to_numpy() ** 2
    cum = np.concatenate([[0.0], np.cumsum(sq)])
    out = np.empty(len(iv))
    for i, date in enumerate(iv.index):
        n = int(ret_dates.searchsorted(date, side="right"))
        if n < window:
            raise InsufficientWindow(
                f"{window} daily returns required before {date}, found {n}"
            )
        implied = (iv.iloc[i] / 100.0) ** 2 * (window / TRADING_DAYS_PER_YEAR)
        realized = cum[n] - cum[n - window]
        out[i] = implied - realized
    return pd.Series(out, index=iv.index, name="vrp")


def rolling_ols_forecast(y, regressors, window: int = 60) -> ForecastSet:
    """Next-period forecasts from trailing-window OLS on lagged predictors.

    For each issue date t the model regresses the window of returns ending
    at t on the predictor values one period earlier, then applies the fitted
    coefficients to the predictors observed at t. The regression includes an
    intercept.

    Parameters
    ----------
    y : pandas.Series or pandas.DataFrame
        Periodic (monthly) returns, one column per asset.
    regressors : pandas.Series or pandas.DataFrame
        Predictor values observed at the end of each period, same index as
        ``y``. Columns are shared across assets.
    window : int
        Number of trailing observations per regression.

    Returns
    -------
    ForecastSet
        Indexed by issue date; the first forecast appears once ``window``
        lagged pairs exist.

    Raises
    ------
    SeriesTooShort
        Fewer than ``window + 1`` observations, or a window too small for
        the regressor count.
    CollinearRegressors
        A window's design matrix is rank deficient (e.g. a regime indicator
        constant over the window duplicates the intercept).
    """
    yf = _as_frame(y, "y")
    xf = _as_frame(regressors, "regressors")
    if len(yf) != len(xf):
        raise LengthMismatch(f"y has {len(yf)} rows, regressors {len(xf)}")
    n_obs, k = len(yf), xf.shape[1]
    if window < k + 2:
        raise SeriesTooShort(f"window {window} too small for {k} regressors plus intercept")
    if n_obs < window + 1:
        raise SeriesTooShort(f"{n_obs} observations cannot fill a window of {window}")

    yv = yf.to_numpy()
    design = np.column_stack([np.ones(n_obs - 1), xf.to_numpy()[:-1]])
    preds = np.empty((n_obs - window, yf.shape[1]))
    for out_row, p in enumerate(range(window, n_obs)):
        rows = slice(p - window, p)
        d = design[rows]
        if np.linalg.matrix_rank(d) < k + 1:
            raise CollinearRegressors(
                f"design matrix rank deficient in the window ending {yf.index[p - 1]}"
            )
        beta, *_ = np.linalg.lstsq(d, yv[1:][rows], rcond=None)
        current = np.concatenate([[1.0], xf.to_numpy()[p]])
        preds[out_row] = current @ beta
    return ForecastSet(pd.DataFrame(preds, index=yf.index[window:], columns=yf.columns))


def naive_forecasts(returns, mode: str = "short_term") -> ForecastSet:
    """Annualized-mean baselines from a daily return panel.

    ``short_term`` is the trailing one-year (252-day) mean, annualized, and
    is causal. ``long_term`` is the full-sample mean applied to every date;
    it uses future data by construction and is tagged ``look_ahead=True``.
    """
    frame = _as_frame(returns, "returns")
    if mode == "short_term":
        if len(frame) < TRADING_DAYS_PER_YEAR:
            raise SeriesTooShort(
                f"short_term needs {TRADING_DAYS_PER_YEAR} days, got {len(frame)}"
            )
        rolled = frame.rolling(TRADING_DAYS_PER_YEAR).mean() * TRADING_DAYS_PER_YEAR
        return ForecastSet(rolled.iloc[TRADING_DAYS_PER_YEAR - 1 :])
    if mode == "long_term":
        if len(frame) < 1:
            raise SeriesTooShort("long_term needs at least one observation")
        level = frame.mean() * TRADING_DAYS_PER_YEAR
        full = pd.DataFrame(
            np.tile(level.to_numpy(), (len(frame), 1)),
            index=frame.index,
            columns=frame.columns,
        )
        return ForecastSet(full, look_ahead=True)
    raise ValueError(f"unknown mode {mode!r}")


def cross_sectional_ic(predicted, realized):
    """Per-date Pearson correlation between predictions and outcomes.

    Parameters
    ----------
    predicted : pandas.DataFrame
        Asset predictions issued at each date.
    realized : pandas.DataFrame
        The returns those predictions targeted, on the same index/columns.

    Returns
    -------
    (pandas.Series, dict)
        The IC series, and a summary with keys ``mean``, ``std`` and
        ``ratio`` (mean over std, the signal-to-noise summary). Dates where
        either cross-section is constant have undefined IC and are NaN in
        the series and excluded from the summary.
    """
    pf = _as_frame(predicted, "predicted")
    rf = _as_frame(realized, "realized")
    if pf.shape != rf.shape or not pf.index.equals(rf.index):
        raise LengthMismatch("predicted and realized must share index and columns")
    if pf.shape[1] < 3:
        raise TooFewAssets(f"need at least 3 assets, got {pf.shape[1]}")
    p = pf.to_numpy() - pf.to_numpy().mean(axis=1, keepdims=True)
    r = rf.to_numpy() - rf.to_numpy().mean(axis=1, keepdims=True)
    denom = np.sqrt((p**2).sum(axis=1) * (r**2).sum(axis=1))
    with np.errstate(invalid="ignore", divide="ignore"):
        ic = np.where(denom > 0, (p * r).sum(axis=1) / denom, np.nan)
    series = pd.Series(ic, index=pf.index, name="ic")
    valid = series.dropna()
    mean = float(valid.mean()) if len(valid) else float("nan")
    std = float(valid.std(ddof=1)) if len(valid) > 1 else float("nan")
    summary = {"mean": mean, "std": std, "ratio": mean / std if std else float("nan")}
    return series, summary


def quintile_ls_portfolio(scores, groups, next_returns, min_group: int = 5) -> float:
    """Group-neutral long/short quintile factor return for one period.

    Within each group of at least ``min_group`` members: rank by score
    (ties keep input order), go long the top fifth and short the bottom
    fifth, equal-weighted within each leg. Groups are then averaged with
    equal weights. Invariant to strictly monotone transforms of the scores.

    Raises
    ------
    NoEligibleGroups
        Every group is smaller than ``min_group``.
    """
    s = np.asarray(scores, dtype=float)
    g = np.asarray(groups)
    r = np.asarray(next_returns, dtype=float)
    if not (len(s) == len(g) == len(r)):
        raise LengthMismatch(
            f"scores, groups, next_returns have lengths {len(s)}, {len(g)}, {len(r)}"
        )
    if not np.all(np.isfinite(s)) or not np.all(np.isfinite(r)):
        raise MissingValue("scores and next_returns must be finite")
    spreads = []
    for label in pd.unique(g):
        members = np.flatnonzero(g == label)
        if len(members) < min_group:
            continue
        n_q = len(members) // 5
        order = members[np.argsort(s[members], kind="stable")]
        spreads.append(float(r[order[-n_q:]].mean() - r[order[:n_q]].mean()))
    if not spreads:
        raise NoEligibleGroups(f"no group has {min_group} or more members")
    return float(np.mean(spreads))
