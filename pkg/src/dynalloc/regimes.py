"""Two-state Markov switching with AR(1) errors, regime heteroskedasticity,
and logistic time-varying transition probabilities.

Observation model, regime m, driver x_t:

    mu_t(m)  = beta0_m + beta1_m x_t
    y_t      ~ Normal(mu_t(m) + phi1 (y_{t-1} - mu_{t-1}(m)), sigma_m^2)

with the stationary AR(1) variance sigma_m^2/(1 - phi1^2) at t = 1. The
transition matrix built from x_t propagates filtered_t into predicted_{t+1};
the initial distribution is the ergodic distribution of the first matrix.
The forward recursion runs per-step in log space, so underflow cannot occur
for finite parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import minimize

from .errors import (
    InvalidParams,
    LengthMismatch,
    NoOverlap,
    NonConvergence,
    NumericalUnderflow,
    SeriesTooShort,
)
from ._base import BaseEstimator
from .validation import as_vector, check_lengths, check_min_length

__all__ = [
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
]

MIN_FIT_LENGTH = 60
HIGH, LOW = "high", "low"


@dataclass(frozen=True)
class MsParams:
    """Two-regime parameters; index 1 is the high-mean ("high") regime."""

    beta0: tuple[float, float]
    beta1: tuple[float, float]
    sigma: tuple[float, float]
    phi1: float
    c: tuple[float, float]
    d: tuple[float, float]

    def validate(self) -> "MsParams":
        flat = [*self.beta0, *self.beta1, *self.sigma, self.phi1, *self.c, *self.d]
        if not all(np.isfinite(v) for v in flat):
            raise InvalidParams("non-finite regime parameters")
        if min(self.sigma) <= 0:
            raise InvalidParams(f"regime volatilities must be positive, got {self.sigma}")
        if abs(self.phi1) >= 1.0:
            raise InvalidParams(f"|phi1| must be < 1, got {self.phi1}")
        return self

    def mean_level(self, driver_mean: float) -> np.ndarray:
        return np.array(
            [
                self.beta0[0] + self.beta1[0] * driver_mean,
                self.beta0[1] + self.beta1[1] * driver_mean,
            ]
        )


@dataclass(frozen=True)
class FilterResult:
    predicted: np.ndarray
    filtered: np.ndarray
    loglik: float


@dataclass(frozen=True)
class RegimeProbSeries:
    """Per-date probabilities of the high regime, by estimate kind."""

    predicted: np.ndarray
    filtered: np.ndarray
    smoothed: np.ndarray
    oos: np.ndarray | None = None


@dataclass(frozen=True)
class MsFit:
    params: MsParams
    probs: RegimeProbSeries
    loglik: float
    degenerate: bool


def transition_matrix(params: MsParams, driver_value: float) -> np.ndarray:
    """Row-stochastic 2x2 matrix; stay probability logistic(c_m + d_m x)."""
    if not np.isfinite(driver_value):
        raise InvalidParams(f"driver value must be finite, got {driver_value}")
    stay = 1.0 / (1.0 + np.exp(-(np.asarray(params.c) + np.asarray(params.d) * driver_value)))
    return np.array([[stay[0], 1.0 - stay[0]], [1.0 - stay[1], stay[1]]])


def _trans_array(params: MsParams, driver: np.ndarray) -> np.ndarray:
    stay = 1.0 / (
        1.0 + np.exp(-(np.asarray(params.c)[None, :] + np.asarray(params.d)[None, :] * driver[:, None]))
    )
    out = np.empty((len(driver), 2, 2))
    out[:, 0, 0] = stay[:, 0]
    out[:, 0, 1] = 1.0 - stay[:, 0]
    out[:, 1, 1] = stay[:, 1]
    out[:, 1, 0] = 1.0 - stay[:, 1]
    return out


def _log_densities(params: MsParams, y: np.ndarray, driver: np.ndarray) -> np.ndarray:
    b0 = np.asarray(params.beta0)
    b1 = np.asarray(params.beta1)
    sig = np.asarray(params.sigma)
    mu = b0[None, :] + b1[None, :] * driver[:, None]
    mean = np.empty_like(mu)
    mean[0] = mu[0]
    mean[1:] = mu[1:] + params.phi1 * (y[:-1, None] - mu[:-1])
    var = np.broadcast_to(sig**2, mu.shape).copy()
    var[0] = sig**2 / (1.0 - params.phi1**2)
    return -0.5 * (np.log(2.0 * np.pi * var) + (y[:, None] - mean) ** 2 / var)


def _ergodic(trans: np.ndarray) -> np.ndarray:
    denom = 2.0 - trans[0, 0] - trans[1, 1]
    if abs(denom) < 1e-12:
        return np.array([0.5, 0.5])
    pi0 = (1.0 - trans[1, 1]) / denom
    return np.array([pi0, 1.0 - pi0])


@njit(cache=True)
def _forward(logdens, trans, init):
    T = logdens.shape[0]
    predicted = np.empty((T, 2))
    filtered = np.empty((T, 2))
    loglik = 0.0
    p0, p1 = init[0], init[1]
    for t in range(T):
        predicted[t, 0] = p0
        predicted[t, 1] = p1
        a0 = np.log(p0) + logdens[t, 0]
        a1 = np.log(p1) + logdens[t, 1]
        m = a0 if a0 > a1 else a1
        w0 = np.exp(a0 - m)
        w1 = np.exp(a1 - m)
        s = w0 + w1
        loglik += m + np.log(s)
        f0 = w0 / s
        f1 = w1 / s
        filtered[t, 0] = f0
        filtered[t, 1] = f1
        p0 = f0 * trans[t, 0, 0] + f1 * trans[t, 1, 0]
        p1 = f0 * trans[t, 0, 1] + f1 * trans[t, 1, 1]
    return predicted, filtered, loglik


def hamilton_filter(params: MsParams, y, driver) -> FilterResult:
    """Forward recursion; probabilities are P(s_t | info) per regime column."""
    params.validate()
    yv = as_vector(y, "y")
    xv = as_vector(driver, "driver")
    check_lengths(yv, xv, names="y and driver")
    check_min_length(yv, 1)
    trans = _trans_array(params, xv)
    logdens = _log_densities(params, yv, xv)
    predicted, filtered, loglik = _forward(logdens, trans, _ergodic(trans[0]))
    if not np.isfinite(loglik):
        raise NumericalUnderflow("filter probability mass vanished")
    return FilterResult(predicted=predicted, filtered=filtered, loglik=float(loglik))


def kim_smoother(filtered, predicted, trans) -> np.ndarray:
    """Backward pass; ``trans[t]`` propagates date t into t+1 (last unused)."""
    f = np.asarray(filtered, dtype=float)
    p = np.asarray(predicted, dtype=float)
    tr = np.asarray(trans, dtype=float)
    if f.shape != p.shape or tr.shape != (f.shape[0], 2, 2):
        raise LengthMismatch(
            f"inconsistent shapes: filtered {f.shape}, predicted {p.shape}, trans {tr.shape}"
        )
    T = f.shape[0]
    sm = np.empty_like(f)
    sm[-1] = f[-1]
    for t in range(T - 2, -1, -1):
        ratio = sm[t + 1] / np.maximum(p[t + 1], 1e-300)
        sm[t] = f[t] * (tr[t] @ ratio)
        sm[t] /= sm[t].sum()
    return sm


def _pack(p: MsParams) -> np.ndarray:
    return np.array(
        [
            p.beta0[0],
            p.beta0[1],
            p.beta1[0],
            p.beta1[1],
            np.log(p.sigma[0]),
            np.log(p.sigma[1]),
            np.arctanh(np.clip(p.phi1, -1 + 1e-10, 1 - 1e-10)),
            p.c[0],
            p.c[1],
            p.d[0],
            p.d[1],
        ]
    )


def _unpack(v: np.ndarray) -> MsParams:
    v = np.clip(v, -30.0, 30.0)
    return MsParams(
        beta0=(float(v[0]), float(v[1])),
        beta1=(float(v[2]), float(v[3])),
        sigma=(float(np.exp(v[4])), float(np.exp(v[5]))),
        phi1=float(np.tanh(v[6])),
        c=(float(v[7]), float(v[8])),
        d=(float(v[9]), float(v[10])),
    )


def _starts(y: np.ndarray, driver: np.ndarray, warm: MsParams | None) -> list[MsParams]:
    med = np.median(y)
    lo = y[y < med] if np.any(y < med) else y
    hi = y[y >= med]
    m_lo, m_hi = float(np.mean(lo)), float(np.mean(hi))
    s_lo = float(np.std(lo)) or float(np.std(y)) or 1.0
    s_hi = float(np.std(hi)) or s_lo
    mid = 0.5 * (m_lo + m_hi)
    rho = 0.0
    if len(y) > 3 and np.std(y) > 0:
        rho = float(np.clip(np.corrcoef(y[:-1], y[1:])[0, 1], -0.9, 0.9))
        if not np.isfinite(rho):
            rho = 0.0
    stay = 2.1972245773362196
    base = dict(beta1=(0.0, 0.0), d=(0.0, 0.0))
    variants = [
        MsParams(beta0=(m_lo, m_hi), sigma=(s_lo, s_hi), phi1=0.0, c=(stay, stay), **base),
        MsParams(beta0=(m_lo, m_hi), sigma=(s_lo, s_hi), phi1=0.5 * rho, c=(stay, stay), **base),
        MsParams(
            beta0=(mid + 1.5 * (m_lo - mid), mid + 1.5 * (m_hi - mid)),
            sigma=(s_lo, s_hi),
            phi1=0.0,
            c=(stay, stay),
            **base,
        ),
        MsParams(beta0=(m_lo, m_hi), sigma=(0.5 * s_lo, 2.0 * s_hi), phi1=0.0, c=(stay, stay), **base),
        MsParams(beta0=(m_lo, m_hi), sigma=(s_lo, s_hi), phi1=0.0, c=(0.8473, 0.8473), **base),
        MsParams(beta0=(m_lo, m_hi), sigma=(s_lo, s_hi), phi1=0.0, c=(3.8918, 3.8918), **base),
        MsParams(beta0=(m_lo, m_hi), sigma=(s_lo, s_hi), phi1=0.3, c=(stay, stay), **base),
        MsParams(beta0=(m_lo, m_hi), sigma=(s_lo, s_hi), phi1=-0.3, c=(stay, stay), **base),
        MsParams(
            beta0=(m_lo, m_hi),
            sigma=(float(np.std(y)) or 1.0,) * 2,
            phi1=0.0,
            c=(stay, stay),
            **base,
        ),
        MsParams(
            beta0=(mid + 0.5 * (m_lo - mid), mid + 0.5 * (m_hi - mid)),
            sigma=(0.7 * s_lo, 1.5 * s_hi),
            phi1=0.0,
            c=(stay, stay),
            **base,
        ),
    ]
    if warm is not None:
        variants.insert(0, warm)
    return variants


def _relabel(p: MsParams, driver_mean: float) -> MsParams:
    levels = p.mean_level(driver_mean)
    if levels[1] >= levels[0]:
        return p
    return MsParams(
        beta0=(p.beta0[1], p.beta0[0]),
        beta1=(p.beta1[1], p.beta1[0]),
        sigma=(p.sigma[1], p.sigma[0]),
        phi1=p.phi1,
        c=(p.c[1], p.c[0]),
        d=(p.d[1], p.d[0]),
    )


def fit_ms(y, driver, n_starts: int = 10, warm: MsParams | None = None) -> MsFit:
    """Quasi-Newton MLE over transformed parameters with deterministic
    multi-starts; regimes relabeled so index 1 has the larger mean level."""
    yv = as_vector(y, "y")
    xv = as_vector(driver, "driver")
    check_lengths(yv, xv, names="y and driver")
    if len(yv) < MIN_FIT_LENGTH:
        raise SeriesTooShort(f"need at least {MIN_FIT_LENGTH} observations, got {len(yv)}")

    def objective(v):
        p = _unpack(v)
        try:
            trans = _trans_array(p, xv)
            logdens = _log_densities(p, yv, xv)
            _, _, ll = _forward(logdens, trans, _ergodic(trans[0]))
        except (FloatingPointError, ValueError):
            return 1e10
        return -ll if np.isfinite(ll) else 1e10

    best = None
    starts = _starts(yv, xv, warm)[: n_starts + (warm is not None)]
    with np.errstate(all="ignore"):
        for start in starts:
            res = minimize(objective, _pack(start), method="L-BFGS-B", options={"maxiter": 300})
            if np.isfinite(res.fun) and res.fun < 1e10 and (best is None or res.fun < best.fun):
                best = res
    if best is None:
        raise NonConvergence("no usable regime-switching optimum found")

    params = _relabel(_unpack(best.x), float(np.mean(xv))).validate()
    filt = hamilton_filter(params, yv, xv)
    smoothed = kim_smoother(filt.filtered, filt.predicted, _trans_array(params, xv))
    probs = RegimeProbSeries(
        predicted=filt.predicted[:, 1],
        filtered=filt.filtered[:, 1],
        smoothed=smoothed[:, 1],
    )
    # two distinct states require separated levels and both states visited
    levels = params.mean_level(float(np.mean(xv)))
    scale = float(np.sqrt(params.sigma[0] * params.sigma[1]))
    occupancy = float(np.mean(smoothed[:, 1]))
    degenerate = bool(
        abs(levels[1] - levels[0]) < 0.5 * scale
        or min(occupancy, 1.0 - occupancy) < 0.05
    )
    return MsFit(params=params, probs=probs, loglik=float(filt.loglik), degenerate=degenerate)


def oos_regime_probs(y, driver, min_window: int = MIN_FIT_LENGTH) -> np.ndarray:
    """One-step-ahead high-regime probability from models fit on data before
    each date; NaN before the minimum window. Deterministic given the data."""
    yv = as_vector(y, "y")
    xv = as_vector(driver, "driver")
    check_lengths(yv, xv, names="y and driver")
    if len(yv) <= min_window:
        raise SeriesTooShort(f"need more than {min_window} observations, got {len(yv)}")
    out = np.full(len(yv), np.nan)
    warm = None
    for j in range(min_window, len(yv)):
        fit = fit_ms(yv[:j], xv[:j], n_starts=4, warm=warm)
        warm = fit.params
        trans = transition_matrix(fit.params, xv[j - 1])
        filtered_last = np.array([1.0 - fit.probs.filtered[-1], fit.probs.filtered[-1]])
        out[j] = float((trans.T @ filtered_last)[1])
    return out


def label_regimes(probs, threshold: float = 0.5) -> np.ndarray:
    """HIGH iff probability >= threshold (ties to high)."""
    p = as_vector(probs, "probs")
    if np.any(p < 0) or np.any(p > 1):
        raise InvalidParams("probabilities must lie in [0, 1]")
    return np.where(p >= threshold, HIGH, LOW)


def four_state(risk_labels, corr_labels) -> np.ndarray:
    """Cartesian pairing, e.g. (high, low) -> 'HR/LC'."""
    r = np.asarray(risk_labels)
    c = np.asarray(corr_labels)
    check_lengths(r, c, names="risk and correlation labels")
    rr = np.where(r == HIGH, "HR", "LR")
    cc = np.where(c == HIGH, "HC", "LC")
    return np.char.add(np.char.add(rr, "/"), cc)


def regime_conditional_stats(returns, labels, periods_per_year: int = 12) -> dict:
    """Annualized mean/vol of a monthly series per label bucket."""
    x = as_vector(returns, "returns")
    lab = np.asarray(labels)
    check_lengths(x, lab, names="returns and labels")
    if x.size == 0:
        raise NoOverlap("no observations to bucket")
    out = {}
    for name in np.unique(lab):
        vals = x[lab == name]
        out[str(name)] = {
            "mean": float(np.mean(vals) * periods_per_year),
            "vol": float(np.std(vals, ddof=1) * np.sqrt(periods_per_year)) if vals.size > 1 else 0.0,
            "count": int(vals.size),
        }
    return out


class MarkovSwitching(BaseEstimator):
    """Two-state switching estimator on a monthly series with a driver."""

    def __init__(self, n_starts: int = 10):
        self.n_starts = n_starts

    def fit(self, y, driver) -> "MarkovSwitching":
        fit = fit_ms(y, driver, n_starts=self.n_starts)
        self.params_ = fit.params
        self.probs_ = fit.probs
        self.loglik_ = fit.loglik
        self.degenerate_ = fit.degenerate
        return self

    def filter(self, y, driver) -> FilterResult:
        self._check_fitted("params_")
        return hamilton_filter(self.params_, y, driver)
