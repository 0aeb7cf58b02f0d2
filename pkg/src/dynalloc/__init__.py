"""Scenario-based risk forecasting and dynamic asset allocation.

The pipeline runs in stages, each usable on its own: return panels
(:mod:`.panel`), per-asset ARMA-GARCH marginals (:mod:`.univariate`),
DCC correlations and t-copula dependence (:mod:`.dependence`), joint
Monte Carlo scenario generation (:mod:`.scenarios`), Markov regime
models (:mod:`.regimes`), return forecasts (:mod:`.alphas`), portfolio
construction (:mod:`.allocators`), and the walk-forward backtester
(:mod:`.backtest`). ``dynalloc.cli`` exposes the same pipeline as the
``dynalloc`` command.
"""

from .alphas import (
    ForecastSet,
    cross_sectional_ic,
    naive_forecasts,
    quintile_ls_portfolio,
    rolling_ols_forecast,
    vrp,
)
from .allocators import (
    Weights,
    diversification_ratio,
    efficient_frontier,
    max_diversification,
    max_return_cvar,
    max_sharpe,
    min_cvar,
    naive_weights,
    quadratic_min,
    resampled_weights,
    risk_contributions,
    risk_parity,
)
from .backtest import (
    BENCHMARK_60_40,
    RISK_MODELS,
    STRATEGIES,
    BacktestConfig,
    BacktestResult,
    ClusterResult,
    StrategyMetrics,
    allocate_once,
    cluster_strategies,
    estimate_risk_inputs,
    max_drawdown,
    monthly_returns,
    performance_metrics,
    regime_breakdown,
    walk_forward,
)
from .dependence import (
    DccCorrelation,
    DccParams,
    TCopula,
    TCopulaParams,
    dcc_filter,
    empirical_tail_dependence,
    empirical_tail_matrix,
    fit_correlation,
    fit_t_copula,
    nearest_correlation,
    pseudo_observations,
    t_tail_dependence,
    weighted_pairwise,
)
from .errors import ConfigError, DataError, DynallocError, NumericalError
from .panel import CompositeSpec, ReturnPanel, composite_index, inner_join, load_panel, month_ends
from .regimes import (
    MarkovSwitching,
    MsFit,
    MsParams,
    RegimeProbSeries,
    fit_ms,
    four_state,
    hamilton_filter,
    kim_smoother,
    label_regimes,
    oos_regime_probs,
    regime_conditional_stats,
    transition_matrix,
)
from .scenarios import (
    JointModelFit,
    RiskForecast,
    ScenarioSet,
    advance_states,
    fit_joint,
    forecast_risk,
    prediction_ic,
    risk_measures,
    simulate_scenarios,
)
from .univariate import (
    ArmaGarch,
    ArmaGarchParams,
    FilterOutput,
    acf,
    filter_residuals,
    fit_arma_garch,
    pacf,
    simulate_univariate,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "DynallocError",
    "ConfigError",
    "DataError",
    "NumericalError",
    # panel
    "ReturnPanel",
    "CompositeSpec",
    "load_panel",
    "composite_index",
    "month_ends",
    "inner_join",
    # univariate
    "ArmaGarchParams",
    "FilterOutput",
    "ArmaGarch",
    "acf",
    "pacf",
    "fit_arma_garch",
    "filter_residuals",
    "simulate_univariate",
    # dependence
    "DccParams",
    "TCopulaParams",
    "DccCorrelation",
    "TCopula",
    "pseudo_observations",
    "fit_correlation",
    "dcc_filter",
    "fit_t_copula",
    "t_tail_dependence",
    "empirical_tail_dependence",
    "empirical_tail_matrix",
    "weighted_pairwise",
    "nearest_correlation",
    # scenarios
    "JointModelFit",
    "ScenarioSet",
    "RiskForecast",
    "fit_joint",
    "advance_states",
    "simulate_scenarios",
    "risk_measures",
    "forecast_risk",
    "prediction_ic",
    # regimes
    "MsParams",
    "RegimeProbSeries",
    "MsFit",
    "MarkovSwitching",
    "transition_matrix",
    "hamilton_filter",
    "kim_smoother",
    "fit_ms",
    "oos_regime_probs",
    "label_regimes",
    "four_state",
    "regime_conditional_stats",
    # alphas
    "ForecastSet",
    "vrp",
    "rolling_ols_forecast",
    "naive_forecasts",
    "cross_sectional_ic",
    "quintile_ls_portfolio",
    # allocators
    "Weights",
    "naive_weights",
    "quadratic_min",
    "risk_parity",
    "max_diversification",
    "min_cvar",
    "max_sharpe",
    "max_return_cvar",
    "resampled_weights",
    "efficient_frontier",
    "risk_contributions",
    "diversification_ratio",
    # backtest
    "BacktestConfig",
    "BacktestResult",
    "StrategyMetrics",
    "ClusterResult",
    "STRATEGIES",
    "RISK_MODELS",
    "BENCHMARK_60_40",
    "estimate_risk_inputs",
    "allocate_once",
    "walk_forward",
    "performance_metrics",
    "max_drawdown",
    "monthly_returns",
    "regime_breakdown",
    "cluster_strategies",
]
