"""Joint model fitting and month-ahead scenario simulation.

The fit is staged: per-asset ARMA-GARCH marginals, a scalar DCC layer on the
standardized residuals, then a t copula on the whitened (correlation-removed)
innovations. Simulation inverts the stages day by day, carrying each path's
own DCC state forward from the terminal fitted state.

Draws come from a single counter-based generator keyed on the master seed, in
path-major layout, so path p consumes a fixed counter block regardless of how
work is scheduled.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, t as student_t

from .dependence import (
    DccParams,
    TCopulaParams,
    dcc_filter,
    fit_correlation,
    fit_t_copula,
    pseudo_observations,
    weighted_pairwise,
)
from .errors import (
    InsufficientHistory,
    InvalidModel,
    SampleTooSmall,
    SeriesTooShort,
    WeightSumError,
)
from .panel import ReturnPanel
from .univariate import ArmaGarchParams, filter_residuals, fit_arma_garch
from .validation import as_vector, check_alpha, check_lengths

__all__ = [
    "JointModelFit",
    "ScenarioSet",
    "RiskForecast",
    "fit_joint",
    "advance_states",
    "simulate_scenarios",
    "risk_measures",
    "forecast_risk",
    "prediction_ic",
]

DEFAULT_MIN_DAYS = 1260


@dataclass(frozen=True)
class JointModelFit:
    """Fitted joint model plus the terminal states simulation starts from."""

    assets: tuple[str, ...]
    marginals: tuple[ArmaGarchParams, ...]
    last_obs: np.ndarray
    last_eps: np.ndarray
    last_sig2: np.ndarray
    dcc: DccParams
    last_q: np.ndarray
    last_z: np.ndarray
    copula: TCopulaParams
    window_kind: str
    window_start: dt.date
    window_end: dt.date

    def validate(self) -> "JointModelFit":
        n = len(self.assets)
        if len(self.marginals) != n:
            raise InvalidModel("one marginal fit required per asset")
        for arr, name in (
            (self.last_obs, "last_obs"),
            (self.last_eps, "last_eps"),
            (self.last_sig2, "last_sig2"),
            (self.last_z, "last_z"),
        ):
            if np.asarray(arr).shape != (n,) or not np.all(np.isfinite(arr)):
                raise InvalidModel(f"{name} must be a finite length-{n} vector")
        if np.any(self.last_sig2 <= 0):
            raise InvalidModel("terminal variances must be positive")
        if self.last_q.shape != (n, n) or np.linalg.eigvalsh(self.last_q).min() <= 0:
            raise InvalidModel("terminal Q must be positive definite")
        if self.dcc.rbar.shape != (n, n) or self.copula.corr.shape != (n, n):
            raise InvalidModel("correlation dimensions inconsistent with asset count")
        for p in self.marginals:
            p.validate()
        self.dcc.validate()
        self.copula.validate()
        return self


@dataclass(frozen=True)
class ScenarioSet:
    """Simulated daily paths with their compounded horizon returns."""

    paths: np.ndarray
    horizon_returns: np.ndarray
    seed: int
    mean_corr: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def horizon(self) -> int:
        return self.paths.shape[1]


@dataclass(frozen=True)
class RiskForecast:
    """Portfolio risk forecast over the simulation horizon."""

    var: float
    cvar: float
    vol: float
    corr: np.ndarray
    wpc: float


def fit_joint(
    panel: ReturnPanel,
    window: str = "expanding",
    min_days: int = DEFAULT_MIN_DAYS,
    gjr: bool = False,
) -> JointModelFit:
    """Staged fit: marginals, then DCC on their standardized residuals, then a
    t copula on the whitened innovations e_t = chol(R_t)^{-1} z_t."""
    if window not in {"expanding", "rolling"}:
        raise ValueError(f"window must be 'expanding' or 'rolling', got {window!r}")
    if len(panel) < min_days:
        raise InsufficientHistory(f"need at least {min_days} observations, got {len(panel)}")
    if window == "rolling":
        panel = panel.tail(min_days)

    marginals = []
    z = np.empty_like(panel.values)
    last_obs = np.empty(panel.n_assets)
    last_eps = np.empty(panel.n_assets)
    last_sig2 = np.empty(panel.n_assets)
    for i, name in enumerate(panel.assets):
        params, filt = fit_arma_garch(panel.column(name), gjr=gjr)
        marginals.append(params)
        z[:, i] = filt.std_residuals
        last_obs[i] = filt.last_obs
        last_eps[i] = filt.residuals[-1]
        last_sig2[i] = filt.sigmas[-1] ** 2

    dcc = fit_correlation(z, mode="dcc")
    r_path, q_path = dcc_filter(dcc, z, return_q=True)
    chol = np.linalg.cholesky(r_path)
    whitened = np.linalg.solve(chol, z[:, :, None])[:, :, 0]
    copula = fit_t_copula(pseudo_observations(whitened))

    return JointModelFit(
        assets=panel.assets,
        marginals=tuple(marginals),
        last_obs=last_obs,
        last_eps=last_eps,
        last_sig2=last_sig2,
        dcc=dcc,
        last_q=q_path[-1],
        last_z=z[-1].copy(),
        copula=copula,
        window_kind=window,
        window_start=panel.dates[0],
        window_end=panel.dates[-1],
    ).validate()


def advance_states(model: JointModelFit, panel: ReturnPanel) -> JointModelFit:
    """Refilter ``panel`` under the fitted parameters, refreshing the terminal
    states without re-estimating; for state updates between refits."""
    model.validate()
    if panel.assets != model.assets:
        raise InvalidModel(f"panel assets {panel.assets} do not match fit {model.assets}")
    n = len(model.assets)
    z = np.empty_like(panel.values)
    last_obs = np.empty(n)
    last_eps = np.empty(n)
    last_sig2 = np.empty(n)
    for i, name in enumerate(panel.assets):
        filt = filter_residuals(model.marginals[i], panel.column(name))
        z[:, i] = filt.std_residuals
        last_obs[i] = filt.last_obs
        last_eps[i] = filt.residuals[-1]
        last_sig2[i] = filt.sigmas[-1] ** 2
    _, q_path = dcc_filter(model.dcc, z, return_q=True)
    return JointModelFit(
        assets=model.assets,
        marginals=model.marginals,
        last_obs=last_obs,
        last_eps=last_eps,
        last_sig2=last_sig2,
        dcc=model.dcc,
        last_q=q_path[-1],
        last_z=z[-1].copy(),
        copula=model.copula,
        window_kind=model.window_kind,
        window_start=model.window_start,
        window_end=panel.dates[-1],
    ).validate()


def simulate_scenarios(
    model: JointModelFit,
    horizon: int = 21,
    n_paths: int = 10_000,
    seed: int = 0,
) -> ScenarioSet:
    """Simulate daily return paths by inverting the fitted stages.

    Per day: copula draw -> uniforms -> Gaussian innovations e -> correlate
    with the path's current chol(R) -> GARCH variance update -> ARMA return.
    """
    model.validate()
    horizon = int(horizon)
    n_paths = int(n_paths)
    if horizon < 1:
        raise InvalidModel(f"horizon must be >= 1, got {horizon}")
    if n_paths < 1:
        raise InvalidModel(f"n_paths must be >= 1, got {n_paths}")

    n = len(model.assets)
    mu = np.array([p.mu for p in model.marginals])
    phi = np.array([p.phi for p in model.marginals])
    theta = np.array([p.theta for p in model.marginals])
    a0 = np.array([p.alpha0 for p in model.marginals])
    a1 = np.array([p.alpha1 for p in model.marginals])
    b1 = np.array([p.beta1 for p in model.marginals])
    g = np.array([p.gamma for p in model.marginals])
    nu = model.copula.nu
    l_cop = np.linalg.cholesky(model.copula.corr)
    a, b, rbar = model.dcc.a, model.dcc.b, model.dcc.rbar

    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    normals = rng.standard_normal((n_paths, horizon, n))
    chis = rng.chisquare(nu, size=(n_paths, horizon))

    q = np.broadcast_to(model.last_q, (n_paths, n, n)).copy()
    z_prev = np.broadcast_to(model.last_z, (n_paths, n)).copy()
    eps_prev = np.broadcast_to(model.last_eps, (n_paths, n)).copy()
    sig2_prev = np.broadcast_to(model.last_sig2, (n_paths, n)).copy()
    x_prev = np.broadcast_to(model.last_obs, (n_paths, n)).copy()

    paths = np.empty((n_paths, horizon, n))
    corr_sum = np.zeros((n, n))
    for h in range(horizon):
        q = (1.0 - a - b) * rbar[None] + a * np.einsum("pi,pj->pij", z_prev, z_prev) + b * q
        d = np.sqrt(np.einsum("pii->pi", q))
        r = q / (d[:, :, None] * d[:, None, :])
        corr_sum += r.mean(axis=0)

        x = (normals[:, h, :] @ l_cop.T) / np.sqrt(chis[:, h] / nu)[:, None]
        u = np.clip(student_t.cdf(x, df=nu), 1e-15, 1.0 - 1e-15)
        e = norm.ppf(u)
        z = np.einsum("pij,pj->pi", np.linalg.cholesky(r), e)

        sig2 = a0 + a1 * eps_prev**2 + b1 * sig2_prev + g * eps_prev**2 * (eps_prev <= 0)
        eps = np.sqrt(sig2) * z
        x_ret = mu + phi * (x_prev - mu) + eps + theta * eps_prev

        paths[:, h, :] = x_ret
        z_prev, eps_prev, sig2_prev, x_prev = z, eps, sig2, x_ret

    horizon_returns = np.prod(1.0 + paths, axis=1) - 1.0
    return ScenarioSet(
        paths=paths,
        horizon_returns=horizon_returns,
        seed=int(seed),
        mean_corr=corr_sum / horizon,
    )


def risk_measures(sample, alpha: float = 0.95) -> dict:
    """Empirical VaR/CVaR (positive loss fractions) and sample volatility.

    CVaR is the exact minimum of the discrete optimization functional
    min over gamma of gamma + mean((loss - gamma)+)/(1 - alpha), so the
    value agrees with the CVaR linear program at any weights, including
    samples with ties at the quantile. On tie-free samples with integer
    (1-alpha)*n it reduces to the mean of the worst (1-alpha)*n returns.
    """
    x = as_vector(sample, "sample")
    check_alpha(alpha)
    if x.size < 100:
        raise SampleTooSmall(f"tail measures need at least 100 observations, got {x.size}")
    losses = np.sort(-x)[::-1]
    tail = (1.0 - alpha) * x.size
    gamma = float(losses[int(np.ceil(tail - 1e-9)) - 1])
    return {
        "var": gamma,
        "cvar": gamma + float(np.maximum(losses - gamma, 0.0).sum()) / tail,
        "vol": float(np.std(x, ddof=1)),
    }


def forecast_risk(
    model: JointModelFit,
    scenarios: ScenarioSet,
    weights,
    alpha: float = 0.95,
) -> RiskForecast:
    """Portfolio CVaR/vol over the horizon plus implied correlation and WPC."""
    w = as_vector(weights, "weights")
    n = scenarios.horizon_returns.shape[1]
    if w.size != n:
        raise WeightSumError(f"expected {n} weights, got {w.size}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-8:
        raise WeightSumError("weights must be nonnegative and sum to 1")
    port = scenarios.horizon_returns @ w
    rm = risk_measures(port, alpha)
    vols = np.std(scenarios.horizon_returns, axis=0, ddof=1)
    wpc = weighted_pairwise(w, vols, scenarios.mean_corr)
    return RiskForecast(
        var=rm["var"],
        cvar=rm["cvar"],
        vol=rm["vol"],
        corr=scenarios.mean_corr,
        wpc=wpc,
    )


def prediction_ic(predicted, realized) -> float:
    """Pearson correlation between forecasts and next-period realizations."""
    p = as_vector(predicted, "predicted")
    r = as_vector(realized, "realized")
    check_lengths(p, r, names="predicted and realized")
    if p.size < 3:
        raise SeriesTooShort(f"need at least 3 aligned observations, got {p.size}")
    return float(np.corrcoef(p, r)[0, 1])
