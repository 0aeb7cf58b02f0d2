"""Serial-correlation diagnostics and univariate volatility models.

ACF/PACF, ARMA(1,1)-GARCH(1,1) with optional leverage (disabled by default),
Gaussian quasi-maximum-likelihood fitting with deterministic multi-starts,
filtering, and path simulation.

Both recursions are linear IIR filters given the elementwise inputs, so the
filter runs through ``scipy.signal.lfilter`` rather than Python loops:

    eps_t   = (y_t - mu) - phi (y_{t-1} - mu) - theta eps_{t-1}
    sig2_t  = alpha0 + (alpha1 + gamma 1[eps_{t-1} <= 0]) eps_{t-1}^2 + beta1 sig2_{t-1}

with sig2_1 initialized at the unconditional variance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from ._base import BaseEstimator
from .errors import InvalidParams, NonConvergence, SeriesTooShort, ZeroVariance
from .validation import as_vector, check_min_length, check_nonconstant

__all__ = [
    "ArmaGarchParams",
    "FilterOutput",
    "ArmaGarch",
    "acf",
    "pacf",
    "fit_arma_garch",
    "filter_residuals",
    "simulate_univariate",
]

MIN_FIT_LENGTH = 250
N_STARTS = 5
_CLIP = 25.0  # bound on logits/log-params in the unconstrained space


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags 1..max_lag."""
    y = as_vector(series)
    max_lag = int(max_lag)
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if len(y) <= max_lag + 2:
        raise SeriesTooShort(
            f"need more than {max_lag + 2} observations for max_lag={max_lag}, got {len(y)}"
        )
    check_nonconstant(y)
    x = y - y.mean()
    denom = float(x @ x)
    return np.array([float(x[k:] @ x[:-k]) / denom for k in range(1, max_lag + 1)])


def pacf(series, max_lag: int) -> np.ndarray:
    """Partial autocorrelations at lags 1..max_lag via the Durbin-Levinson recursion."""
    rho = acf(series, max_lag)
    out = np.empty(max_lag)
    out[0] = rho[0]
    prev = np.array([rho[0]])
    for k in range(2, max_lag + 1):
        num = rho[k - 1] - prev @ rho[k - 2 :: -1][: k - 1]
        den = 1.0 - prev @ rho[: k - 1]
        phi_kk = num / den
        prev = np.append(prev - phi_kk * prev[::-1], phi_kk)
        out[k - 1] = phi_kk
    return out


# ---------------------------------------------------------------------------
# parameters and filtering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArmaGarchParams:
    mu: float
    phi: float
    theta: float
    alpha0: float
    alpha1: float
    beta1: float
    gamma: float = 0.0

    @property
    def persistence(self) -> float:
        return self.alpha1 + self.beta1 + 0.5 * self.gamma

    @property
    def unconditional_variance(self) -> float:
        return self.alpha0 / (1.0 - self.persistence)

    def validate(self) -> "ArmaGarchParams":
        if not all(
            np.isfinite(v)
            for v in (self.mu, self.phi, self.theta, self.alpha0, self.alpha1, self.beta1, self.gamma)
        ):
            raise InvalidParams("non-finite parameter")
        if abs(self.phi) >= 1.0 or abs(self.theta) >= 1.0:
            raise InvalidParams(f"|phi| and |theta| must be < 1, got {self.phi}, {self.theta}")
        if self.alpha0 <= 0.0:
            raise InvalidParams(f"alpha0 must be > 0, got {self.alpha0}")
        if self.alpha1 < 0.0 or self.beta1 < 0.0 or self.gamma < 0.0:
            raise InvalidParams("alpha1, beta1 and gamma must be nonnegative")
        if self.persistence >= 1.0:
            raise InvalidParams(
                f"alpha1 + beta1 + gamma/2 = {self.persistence} violates stationarity"
            )
        return self

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "phi": self.phi,
            "theta": self.theta,
            "alpha0": self.alpha0,
            "alpha1": self.alpha1,
            "beta1": self.beta1,
            "gamma": self.gamma,
        }


@dataclass(frozen=True)
class FilterOutput:
    """Filter pass over a series: residuals, conditional sigmas, standardized
    residuals, Gaussian log-likelihood, and the final observation (so the tail
    state (y_T, eps_T, sigma_T) is self-contained for simulation handoff)."""

    residuals: np.ndarray
    sigmas: np.ndarray
    std_residuals: np.ndarray
    loglik: float
    last_obs: float


def _filter_core(params: ArmaGarchParams, y: np.ndarray, state=None):
    """Filter pass. ``state`` is a presample (x_pre, eps_pre, sig2_pre) triple
    for continuation; None starts from (0, 0, unconditional variance) with
    sig2_1 pinned at the unconditional variance."""
    x = y - params.mu
    eps_in = x.copy()
    eps_in[1:] -= params.phi * x[:-1]
    if state is None:
        eps = lfilter([1.0], [1.0, params.theta], eps_in)
        sig2_1 = params.unconditional_variance
        if len(y) > 1:
            lagged = eps[:-1]
            arch = params.alpha1 + params.gamma * (lagged <= 0.0)
            u = params.alpha0 + arch * lagged**2
            rest, _ = lfilter(
                [1.0], [1.0, -params.beta1], u, zi=np.array([params.beta1 * sig2_1])
            )
            sig2 = np.concatenate(([sig2_1], rest))
        else:
            sig2 = np.array([sig2_1])
    else:
        x_pre, eps_pre, sig2_pre = state
        eps_in[0] -= params.phi * x_pre
        eps, _ = lfilter(
            [1.0], [1.0, params.theta], eps_in, zi=np.array([-params.theta * eps_pre])
        )
        lagged = np.concatenate(([eps_pre], eps[:-1]))
        arch = params.alpha1 + params.gamma * (lagged <= 0.0)
        u = params.alpha0 + arch * lagged**2
        sig2, _ = lfilter(
            [1.0], [1.0, -params.beta1], u, zi=np.array([params.beta1 * sig2_pre])
        )
    loglik = -0.5 * float(np.sum(np.log(2.0 * np.pi * sig2) + eps**2 / sig2))
    return eps, sig2, loglik


def filter_residuals(
    params: ArmaGarchParams, series, init: FilterOutput | None = None
) -> FilterOutput:
    """Deterministic filter pass of ``params`` over ``series``.

    ``init`` continues the recursion from a previous chunk's tail state; the
    summed log-likelihood over chunks equals the single-pass value.
    """
    params.validate()
    y = as_vector(series)
    if init is None:
        check_min_length(y, 2)
        state = None
    else:
        check_min_length(y, 1)
        state = (
            init.last_obs - params.mu,
            float(init.residuals[-1]),
            float(init.sigmas[-1]) ** 2,
        )
    eps, sig2, loglik = _filter_core(params, y, state)
    sigmas = np.sqrt(sig2)
    return FilterOutput(eps, sigmas, eps / sigmas, loglik, float(y[-1]))


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _logit(p):
    p = np.clip(p, 1e-11, 1 - 1e-11)
    return np.log(p / (1.0 - p))


def _unpack(v: np.ndarray, gjr: bool) -> ArmaGarchParams:
    v = np.clip(v, -_CLIP, _CLIP)
    mu = v[0]
    phi = np.tanh(v[1])
    theta = np.tanh(v[2])
    alpha0 = np.exp(v[3])
    s = _sigmoid(v[4])
    if gjr:
        e1, e2 = np.exp(v[5]), np.exp(v[6])
        denom = e1 + e2 + 1.0
        alpha1 = s * e1 / denom
        beta1 = s * e2 / denom
        gamma = 2.0 * s / denom
    else:
        share = _sigmoid(v[5])
        alpha1 = s * share
        beta1 = s * (1.0 - share)
        gamma = 0.0
    return ArmaGarchParams(float(mu), float(phi), float(theta), float(alpha0),
                           float(alpha1), float(beta1), float(gamma))


def _pack(p: ArmaGarchParams, gjr: bool) -> np.ndarray:
    head = [
        p.mu,
        np.arctanh(np.clip(p.phi, -1 + 1e-10, 1 - 1e-10)),
        np.arctanh(np.clip(p.theta, -1 + 1e-10, 1 - 1e-10)),
        np.log(p.alpha0),
        _logit(p.persistence),
    ]
    if gjr:
        s = max(p.persistence, 1e-10)
        p3 = max(0.5 * p.gamma / s, 1e-11)
        head += [np.log(max(p.alpha1 / s, 1e-11) / p3), np.log(max(p.beta1 / s, 1e-11) / p3)]
    else:
        head += [_logit(p.alpha1 / max(p.persistence, 1e-10))]
    return np.clip(np.array(head, dtype=float), -_CLIP, _CLIP)


def _starts(y: np.ndarray, gjr: bool, warm: ArmaGarchParams | None) -> list[np.ndarray]:
    var = float(np.var(y))
    mean = float(np.mean(y))
    shapes = [(0.95, 0.10), (0.90, 0.05), (0.98, 0.05), (0.70, 0.20), (0.50, 0.50)]
    out = []
    if warm is not None:
        out.append(_pack(warm, gjr))
    for s, share in shapes:
        gamma = 0.1 * s if gjr else 0.0
        alpha1 = (s - gamma / 2) * share
        beta1 = (s - gamma / 2) * (1 - share)
        p = ArmaGarchParams(mean, 0.0, 0.0, var * (1 - s), alpha1, beta1, gamma)
        out.append(_pack(p, gjr))
    return out


def fit_arma_garch(
    series,
    gjr: bool = False,
    n_starts: int = N_STARTS,
    warm: ArmaGarchParams | None = None,
) -> tuple[ArmaGarchParams, FilterOutput]:
    """Gaussian QMLE over transformed (unconstrained) parameters.

    Runs ``n_starts`` deterministic starts (plus an optional warm start) of
    L-BFGS-B and keeps the best likelihood. Constraints hold by construction
    of the transforms.
    """
    y = as_vector(series)
    check_min_length(y, MIN_FIT_LENGTH)
    check_nonconstant(y)

    def objective(v):
        p = _unpack(v, gjr)
        try:
            _, sig2, ll = _filter_core(p, y)
        except FloatingPointError:
            return 1e10
        if not np.isfinite(ll):
            return 1e10
        return -ll

    best = None
    with np.errstate(over="ignore", invalid="ignore"):
        for x0 in _starts(y, gjr, warm)[: n_starts + (warm is not None)]:
            res = minimize(objective, x0, method="L-BFGS-B", options={"maxiter": 500})
            if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
                best = res
    if best is None or not np.isfinite(best.fun) or best.fun >= 1e10:
        raise NonConvergence("ARMA-GARCH fit found no usable optimum across starts")
    params = _unpack(best.x, gjr).validate()
    return params, filter_residuals(params, y)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def simulate_univariate(
    params: ArmaGarchParams,
    horizon: int,
    n_paths: int,
    seed: int,
    init: FilterOutput | None = None,
) -> np.ndarray:
    """Simulate ``n_paths x horizon`` Gaussian-innovation paths.

    ``init`` seeds the recursion from a filter's tail state; without it the
    recursion starts at the stationary state (eps=0, sig2 unconditional,
    lagged value mu). Bit-reproducible for a given seed.
    """
    params.validate()
    horizon = int(horizon)
    n_paths = int(n_paths)
    if horizon < 0 or n_paths < 1:
        raise ValueError("horizon must be >= 0 and n_paths >= 1")
    if horizon == 0:
        return np.empty((n_paths, 0))
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    shocks = rng.standard_normal((n_paths, horizon))
    if init is None:
        eps = np.zeros(n_paths)
        sig2 = np.full(n_paths, params.unconditional_variance)
        lag = np.full(n_paths, params.mu)
    else:
        eps = np.full(n_paths, float(init.residuals[-1]))
        sig2 = np.full(n_paths, float(init.sigmas[-1]) ** 2)
        lag = np.full(n_paths, float(init.last_obs))
    out = np.empty((n_paths, horizon))
    for h in range(horizon):
        sig2 = params.alpha0 + (params.alpha1 + params.gamma * (eps <= 0.0)) * eps**2 \
            + params.beta1 * sig2
        new_eps = np.sqrt(sig2) * shocks[:, h]
        out[:, h] = params.mu + params.phi * (lag - params.mu) + new_eps + params.theta * eps
        lag = out[:, h]
        eps = new_eps
    return out


# ---------------------------------------------------------------------------
# estimator facade
# ---------------------------------------------------------------------------

class ArmaGarch(BaseEstimator):
    """ARMA(1,1)-GARCH(1,1) estimator with optional leverage term.

    Parameters
    ----------
    gjr : bool
        Include the leverage coefficient gamma on negative shocks.
    n_starts : int
        Deterministic multi-start budget for the likelihood search.
    """

    def __init__(self, gjr: bool = False, n_starts: int = N_STARTS):
        self.gjr = gjr
        self.n_starts = n_starts

    def fit(self, y, warm: ArmaGarchParams | None = None) -> "ArmaGarch":
        self.params_, self.filter_ = fit_arma_garch(
            y, gjr=self.gjr, n_starts=self.n_starts, warm=warm
        )
        self.loglik_ = self.filter_.loglik
        return self

    def filter(self, y) -> FilterOutput:
        self._check_fitted("params_")
        return filter_residuals(self.params_, y)

    def simulate(self, horizon: int, n_paths: int, seed: int, init: FilterOutput | None = None):
        self._check_fitted("params_")
        return simulate_univariate(self.params_, horizon, n_paths, seed,
                                   init=self.filter_ if init is None else init)
