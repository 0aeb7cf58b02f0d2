"""Walk-forward monthly-rebalance backtesting.

Compares allocation strategies under three risk-input models (trailing
one-year sample statistics, expanding five-year sample statistics, or the
staged GARCH-DCC-copula simulation), with buy-and-hold drift between
month-end rebalances. Includes performance metrics, regime-conditional
return breakdowns, and hierarchical strategy clustering.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.cluster.hierarchy import linkage as scipy_linkage
from scipy.spatial.distance import squareform

from .allocators import (
    Weights,
    _ru_cvar,
    diversification_ratio,
    max_diversification,
    max_return_cvar,
    max_sharpe,
    min_cvar,
    naive_weights,
    quadratic_min,
    risk_parity,
)
from .dependence import (
    empirical_tail_matrix,
    nearest_correlation,
    t_tail_dependence,
    weighted_pairwise,
)
from .errors import (
    BadConfigValue,
    ConstantColumn,
    DegenerateWeights,
    InsufficientHistory,
    InvalidModel,
    LengthMismatch,
    NoOverlap,
    ResultTooShort,
    TooFewStrategies,
    UnknownStrategy,
    ZeroVol,
)
from .panel import ReturnPanel, month_ends
from .scenarios import fit_joint, simulate_scenarios
from .validation import check_alpha

__all__ = [
    "BacktestConfig",
    "BacktestResult",
    "StrategyMetrics",
    "ClusterResult",
    "STRATEGIES",
    "RISK_MODELS",
    "BENCHMARK_60_40",
    "derive_seed",
    "estimate_risk_inputs",
    "allocate_once",
    "walk_forward",
    "performance_metrics",
    "max_drawdown",
    "monthly_returns",
    "regime_breakdown",
    "cluster_strategies",
]

TRADING_DAYS_PER_YEAR = 252
MONTHS_PER_YEAR = 12

STRATEGIES = (
    "equal_weight",
    "inverse_vol",
    "min_variance",
    "risk_parity",
    "max_diversification",
    "min_cvar",
    "min_var_tail",
    "min_tail_dependence",
    "max_sharpe",
    "max_return_cvar",
    "fixed",
)

RISK_MODELS = {
    "rolling_1y": 252,
    "expanding_5y": 1260,
    "garch_dcc_copula": 1260,
}

ALPHA_MODELS = ("short_term", "long_term")

# stock/bond/commodity/alternative benchmark mix
BENCHMARK_60_40 = (0.30, 0.30, 0.20, 0.20)

# quantile level for counting joint tail exceedances in sample windows
EMPIRICAL_TAIL_Q = 0.05

ALPHA_WINDOW = 252


@dataclass(frozen=True)
class BacktestConfig:
    """One cell of the strategy x risk-model comparison grid.

    Parameters
    ----------
    strategy : str
        One of ``STRATEGIES``. ``"fixed"`` holds ``fixed_weights`` and
        ignores the risk inputs.
    risk_model : str
        ``rolling_1y`` (trailing 252-day sample stats), ``expanding_5y``
        (all history, minimum 1260 days), or ``garch_dcc_copula``
        (staged model refit each rebalance, scenario-based inputs).
    alpha_model : str or None
        Optional expected-return override for the return-seeking
        strategies: ``short_term`` is the trailing one-year mean,
        ``long_term`` the full-sample mean (deliberately look-ahead,
        flagged in the result). ``None`` uses the risk model's own mean.
    alpha : float
        CVaR confidence level for scenario objectives and realized CVaR.
    seed : int
        Master seed; each rebalance derives its own stream from
        ``(seed, date.toordinal())`` so truncating the panel cannot
        change earlier draws.
    horizon, n_paths : int
        Simulation settings for the garch_dcc_copula risk model.
    tc_bps : float
        Flat transaction cost in basis points of turnover (default 0).
    risk_free : float
        Annualized risk-free rate for the Sharpe ratio.
    fixed_weights : tuple of float, optional
        Required by (and only by) the ``"fixed"`` strategy.
    """

    strategy: str
    risk_model: str = "rolling_1y"
    alpha_model: str | None = None
    alpha: float = 0.95
    seed: int = 0
    horizon: int = 21
    n_paths: int = 10_000
    tc_bps: float = 0.0
    risk_free: float = 0.0
    fixed_weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise UnknownStrategy(
                f"unknown strategy {self.strategy!r}; choose from {', '.join(STRATEGIES)}"
            )
        if self.risk_model not in RISK_MODELS:
            raise BadConfigValue(
                f"unknown risk model {self.risk_model!r}; choose from {', '.join(RISK_MODELS)}"
            )
        if self.alpha_model is not None and self.alpha_model not in ALPHA_MODELS:
            raise BadConfigValue(
                f"unknown alpha model {self.alpha_model!r}; choose from {', '.join(ALPHA_MODELS)}"
            )
        check_alpha(self.alpha)
        if self.horizon < 1 or self.n_paths < 1:
            raise BadConfigValue("horizon and n_paths must be positive")
        if self.tc_bps < 0:
            raise BadConfigValue(f"transaction cost must be nonnegative, got {self.tc_bps}")
        if self.strategy == "fixed":
            if self.fixed_weights is None:
                raise BadConfigValue("the fixed strategy requires fixed_weights")
            w = np.asarray(self.fixed_weights, dtype=float)
            if w.size == 0 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-8:
                raise BadConfigValue("fixed_weights must be nonnegative and sum to 1")
        elif self.fixed_weights is not None:
            raise BadConfigValue("fixed_weights is only valid with the fixed strategy")

    @property
    def min_days(self) -> int:
        return RISK_MODELS[self.risk_model]


@dataclass(frozen=True)
class RiskInputs:
    """Estimated inputs handed to the allocator at one rebalance."""

    vols: np.ndarray
    cov: np.ndarray
    tail: np.ndarray
    scenarios: np.ndarray | None
    expected: np.ndarray


@dataclass(frozen=True)
class StrategyMetrics:
    """Headline performance numbers for one backtest."""

    ann_return: float
    ann_vol: float
    sharpe: float
    max_drawdown: float
    realized_cvar: float
    diversification_ratio: float
    wptd: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.max_drawdown <= 1.0:
            raise InvalidModel(f"max drawdown must lie in [0, 1], got {self.max_drawdown}")
        if self.ann_vol < 0.0:
            raise InvalidModel(f"volatility must be nonnegative, got {self.ann_vol}")


@dataclass(frozen=True)
class BacktestResult:
    """Wealth curve, weight history, and final-period risk inputs."""

    config: BacktestConfig
    wealth: pd.Series
    weights: pd.DataFrame
    flags: dict[dt.date, tuple[str, ...]]
    final_inputs: RiskInputs
    metrics: StrategyMetrics | None = None

    def __post_init__(self) -> None:
        w = self.wealth.to_numpy(dtype=float)
        if w.size == 0 or np.any(w <= 0.0) or not np.all(np.isfinite(w)):
            raise InvalidModel("wealth curve must be finite and strictly positive")
        rows = self.weights.to_numpy(dtype=float)
        if rows.size and (np.any(rows < -1e-10) or np.any(np.abs(rows.sum(axis=1) - 1.0) > 1e-8)):
            raise InvalidModel("every weight row must be simplex-feasible")


@dataclass(frozen=True)
class ClusterResult:
    """Average-linkage tree over strategies plus correlation eigenvalue ratios."""

    linkage: np.ndarray
    eigenvalue_ratios: np.ndarray
    names: tuple[str, ...]


# ---------------------------------------------------------------------------
# risk-input estimation
# ---------------------------------------------------------------------------

def _sample_inputs(window: np.ndarray) -> RiskInputs:
    cov = np.atleast_2d(np.cov(window, rowvar=False))
    vols = np.sqrt(np.diag(cov))
    tail = empirical_tail_matrix(window, EMPIRICAL_TAIL_Q) if window.shape[1] > 1 else np.eye(1)
    return RiskInputs(
        vols=vols,
        cov=cov,
        tail=tail,
        scenarios=window,
        expected=window.mean(axis=0),
    )


def derive_seed(master: int, date: dt.date) -> int:
    """Per-rebalance stream seed, a pure function of (master, date).

    Later observations never enter the derivation, so truncating the panel
    after ``date`` cannot change the scenarios drawn at ``date``.
    """
    return int(np.random.SeedSequence((master, date.toordinal())).generate_state(1)[0])


def _model_inputs(history: ReturnPanel, config: BacktestConfig, date: dt.date) -> RiskInputs:
    model = fit_joint(history, window="expanding", min_days=config.min_days)
    scen = simulate_scenarios(
        model, horizon=config.horizon, n_paths=config.n_paths, seed=derive_seed(config.seed, date)
    )
    r = scen.horizon_returns
    cov = np.atleast_2d(np.cov(r, rowvar=False))
    return RiskInputs(
        vols=np.sqrt(np.diag(cov)),
        cov=cov,
        tail=t_tail_dependence(model.copula),
        scenarios=r,
        expected=r.mean(axis=0),
    )


def estimate_risk_inputs(
    history: ReturnPanel, config: BacktestConfig, date: dt.date
) -> RiskInputs:
    """Risk inputs for a rebalance at ``date`` from data through ``date``."""
    if config.risk_model == "rolling_1y":
        return _sample_inputs(history.tail(config.min_days).values)
    if config.risk_model == "expanding_5y":
        return _sample_inputs(history.values)
    return _model_inputs(history, config, date)


def _expected_override(panel: ReturnPanel, history: ReturnPanel, mode: str) -> np.ndarray:
    if mode == "short_term":
        return history.tail(ALPHA_WINDOW).values.mean(axis=0)
    return panel.values.mean(axis=0)


# ---------------------------------------------------------------------------
# strategy dispatch
# ---------------------------------------------------------------------------

def _psd_tail(tail: np.ndarray) -> np.ndarray:
    # entrywise tail maps need not stay PSD; project before optimizing
    return nearest_correlation(tail) if tail.shape[0] > 1 else tail


def _allocate(config: BacktestConfig, inputs: RiskInputs) -> Weights:
    name = config.strategy
    if name == "fixed":
        return Weights(np.asarray(config.fixed_weights, dtype=float))
    if name == "equal_weight":
        return naive_weights(inputs.vols.size, "equal")
    if name == "inverse_vol":
        return naive_weights(inputs.vols, "inverse_vol")
    if name == "min_variance":
        return quadratic_min(inputs.cov)
    if name == "risk_parity":
        return risk_parity(inputs.cov)
    if name == "max_diversification":
        return max_diversification(inputs.cov)
    if name == "min_cvar":
        return min_cvar(inputs.scenarios, config.alpha)
    if name == "min_var_tail":
        lam = _psd_tail(inputs.tail)
        return quadratic_min(np.outer(inputs.vols, inputs.vols) * lam)
    if name == "min_tail_dependence":
        return quadratic_min(_psd_tail(inputs.tail))
    if name == "max_sharpe":
        return max_sharpe(inputs.expected, inputs.cov)
    return max_return_cvar(inputs.expected, inputs.scenarios, config.alpha)


# ---------------------------------------------------------------------------
# walk-forward engine
# ---------------------------------------------------------------------------

def _uses_alpha(config: BacktestConfig) -> bool:
    return config.alpha_model is not None and config.strategy in (
        "max_sharpe",
        "max_return_cvar",
    )


def _decide(
    panel: ReturnPanel, config: BacktestConfig, date: dt.date
) -> tuple[Weights, RiskInputs]:
    history = panel.through(date)
    inputs = estimate_risk_inputs(history, config, date)
    weights_flags: tuple[str, ...] = ()
    if _uses_alpha(config):
        inputs = dataclasses.replace(
            inputs, expected=_expected_override(panel, history, config.alpha_model)
        )
        if config.alpha_model == "long_term":
            weights_flags = ("look_ahead_alpha",)
    w = _allocate(config, inputs)
    if weights_flags:
        w = dataclasses.replace(w, flags=tuple(w.flags) + weights_flags)
    return w, inputs


def allocate_once(
    panel: ReturnPanel, config: BacktestConfig, date: dt.date | None = None
) -> tuple[dt.date, Weights, RiskInputs]:
    """One rebalance decision on data through ``date`` (default: last date)."""
    date = panel.dates[-1] if date is None else date
    history = panel.through(date)
    if len(history) < config.min_days:
        raise InsufficientHistory(
            f"{config.risk_model} needs {config.min_days} days, "
            f"panel has {len(history)} through {date}"
        )
    if config.strategy == "fixed" and len(config.fixed_weights) != panel.n_assets:
        raise LengthMismatch(
            f"fixed_weights has {len(config.fixed_weights)} entries "
            f"for {panel.n_assets} assets"
        )
    weights, inputs = _decide(panel, config, date)
    return date, weights, inputs


def walk_forward(panel: ReturnPanel, config: BacktestConfig) -> BacktestResult:
    """Run one strategy through the panel with monthly rebalancing.

    At each month-end with at least the risk model's minimum history the
    inputs are re-estimated and the allocator is called; the resulting
    weights are bought at that close, so they earn returns from the next
    day on and drift with prices until the next rebalance. Wealth starts
    at 1.0 on the first rebalance date.

    Raises
    ------
    InsufficientHistory
        If no month-end has enough history.
    LengthMismatch
        If fixed_weights does not match the panel's asset count.
    """
    if config.strategy == "fixed" and len(config.fixed_weights) != panel.n_assets:
        raise LengthMismatch(
            f"fixed_weights has {len(config.fixed_weights)} entries "
            f"for {panel.n_assets} assets"
        )
    index = {d: i for i, d in enumerate(panel.dates)}
    rebalance = [d for d in month_ends(panel) if index[d] + 1 >= config.min_days]
    if not rebalance:
        raise InsufficientHistory(
            f"{config.risk_model} needs {config.min_days} days before the first "
            f"month-end; panel has {len(panel)}"
        )

    values = panel.values
    start = index[rebalance[0]]
    pending = list(rebalance)
    holdings: np.ndarray | None = None
    wealth_dates: list[dt.date] = []
    wealth_values: list[float] = []
    weight_rows: list[np.ndarray] = []
    flags: dict[dt.date, tuple[str, ...]] = {}
    inputs: RiskInputs | None = None

    for i in range(start, len(panel)):
        date = panel.dates[i]
        if holdings is not None:
            holdings = holdings * (1.0 + values[i])
            wealth = float(holdings.sum())
        else:
            wealth = 1.0
        if pending and date == pending[0]:
            pending.pop(0)
            w, inputs = _decide(panel, config, date)
            if config.tc_bps > 0.0 and holdings is not None:
                turnover = float(np.abs(w.values - holdings / wealth).sum())
                wealth -= wealth * turnover * config.tc_bps / 1e4
            holdings = wealth * w.values
            weight_rows.append(w.values)
            flags[date] = tuple(w.flags)
        wealth_dates.append(date)
        wealth_values.append(wealth)

    result = BacktestResult(
        config=config,
        wealth=pd.Series(wealth_values, index=pd.DatetimeIndex(wealth_dates), name="wealth"),
        weights=pd.DataFrame(
            np.vstack(weight_rows),
            index=pd.DatetimeIndex(rebalance),
            columns=list(panel.assets),
        ),
        flags=flags,
        final_inputs=dataclasses.replace(inputs, scenarios=None),
    )
    try:
        return dataclasses.replace(result, metrics=performance_metrics(result))
    except (ResultTooShort, ZeroVol):
        return result


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def max_drawdown(wealth) -> float:
    """Largest peak-to-trough decline, as a fraction of the peak."""
    w = np.asarray(wealth, dtype=float)
    return float(np.max(1.0 - w / np.maximum.accumulate(w)))


def monthly_returns(wealth: pd.Series) -> pd.Series:
    """Calendar-month returns from a daily wealth curve."""
    dates = [pd.Timestamp(d).date() for d in wealth.index]
    keep: list[int] = []
    for i, d in enumerate(dates):
        if keep and (dates[keep[-1]].year, dates[keep[-1]].month) == (d.year, d.month):
            keep[-1] = i
        else:
            keep.append(i)
    month_wealth = wealth.to_numpy(dtype=float)[keep]
    rets = month_wealth[1:] / month_wealth[:-1] - 1.0
    return pd.Series(rets, index=wealth.index[keep][1:], name="monthly_return")


def performance_metrics(
    result: BacktestResult,
    cov: np.ndarray | None = None,
    vols: np.ndarray | None = None,
    tail: np.ndarray | None = None,
) -> StrategyMetrics:
    """Headline metrics from a finished backtest.

    Diversification ratio and weighted portfolio tail dependence are
    evaluated at the final rebalance weights, against the final estimated
    inputs unless overridden. WPTD is NaN when the final portfolio is
    concentrated in a single asset.

    Raises
    ------
    ResultTooShort
        If the wealth curve spans less than one year.
    ZeroVol
        If realized volatility is zero (Sharpe undefined).
    """
    w = result.wealth.to_numpy(dtype=float)
    if w.size < TRADING_DAYS_PER_YEAR + 1:
        raise ResultTooShort(
            f"need at least a year of wealth history, got {w.size} days"
        )
    daily = w[1:] / w[:-1] - 1.0
    ann_return = float((w[-1] / w[0]) ** (TRADING_DAYS_PER_YEAR / daily.size) - 1.0)
    ann_vol = float(np.std(daily, ddof=1) * np.sqrt(TRADING_DAYS_PER_YEAR))
    if ann_vol == 0.0:
        raise ZeroVol("realized volatility is zero; the Sharpe ratio is undefined")

    monthly = monthly_returns(result.wealth).to_numpy()
    final_w = result.weights.to_numpy(dtype=float)[-1]
    cov = result.final_inputs.cov if cov is None else np.asarray(cov, dtype=float)
    vols = result.final_inputs.vols if vols is None else np.asarray(vols, dtype=float)
    tail = result.final_inputs.tail if tail is None else np.asarray(tail, dtype=float)
    try:
        wptd = weighted_pairwise(final_w, vols, tail)
    except DegenerateWeights:
        wptd = float("nan")
    return StrategyMetrics(
        ann_return=ann_return,
        ann_vol=ann_vol,
        sharpe=(ann_return - result.config.risk_free) / ann_vol,
        max_drawdown=max_drawdown(w),
        realized_cvar=_ru_cvar(monthly, result.config.alpha),
        diversification_ratio=diversification_ratio(final_w, cov),
        wptd=wptd,
    )


def regime_breakdown(result: BacktestResult, labels: pd.Series) -> dict[str, float]:
    """Annualized mean monthly return per regime bucket.

    ``labels`` maps dates to bucket names (risk labels, correlation
    labels, or four-state combinations); only months whose end date
    carries a label are counted.

    Raises
    ------
    NoOverlap
        If no monthly return date carries a label.
    """
    monthly = monthly_returns(result.wealth)
    labels = labels.copy()
    labels.index = pd.DatetimeIndex(labels.index)
    common = monthly.index.intersection(labels.index)
    if len(common) == 0:
        raise NoOverlap("regime labels share no dates with the backtest months")
    rets = monthly.loc[common]
    buckets = labels.loc[common]
    return {
        str(name): float(rets[buckets == name].mean() * MONTHS_PER_YEAR)
        for name in pd.unique(buckets)
    }


# ---------------------------------------------------------------------------
# strategy clustering
# ---------------------------------------------------------------------------

def cluster_strategies(strategy_returns) -> ClusterResult:
    """Average-linkage clustering of strategies on correlation distance.

    Distance between strategies i and j is sqrt(2(1 - rho_ij)); the
    eigenvalue ratios are the sorted eigenvalues of the K x K correlation
    matrix divided by K (they sum to one).

    Raises
    ------
    TooFewStrategies
        If fewer than 2 strategies or fewer than 12 observations.
    ConstantColumn
        If any strategy's returns are constant (correlation undefined).
    """
    if isinstance(strategy_returns, pd.DataFrame):
        names = tuple(str(c) for c in strategy_returns.columns)
        x = strategy_returns.to_numpy(dtype=float)
    else:
        x = np.atleast_2d(np.asarray(strategy_returns, dtype=float))
        names = tuple(f"s{i}" for i in range(x.shape[1]))
    t, k = x.shape
    if k < 2:
        raise TooFewStrategies(f"clustering needs at least 2 strategies, got {k}")
    if t < 12:
        raise TooFewStrategies(f"clustering needs at least 12 observations, got {t}")
    constant = np.ptp(x, axis=0) == 0.0
    if np.any(constant):
        raise ConstantColumn(
            f"strategy {names[int(np.argmax(constant))]!r} has constant returns"
        )

    corr = np.clip(np.corrcoef(x, rowvar=False), -1.0, 1.0)
    dist = np.sqrt(np.clip(2.0 * (1.0 - corr), 0.0, None))
    np.fill_diagonal(dist, 0.0)
    tree = scipy_linkage(squareform(dist, checks=False), method="average")
    ratios = np.sort(np.linalg.eigvalsh(corr))[::-1] / k
    return ClusterResult(linkage=tree, eigenvalue_ratios=ratios, names=names)
