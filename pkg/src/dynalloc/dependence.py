"""Cross-asset dependence: CCC/DCC correlation dynamics, t-copula fitting,
tail-dependence matrices, and weighted pairwise aggregates.

The scalar DCC recursion

    Q_t = (1 - a - b) Qbar + a z_{t-1} z_{t-1}' + b Q_{t-1}

is linear in Q given the outer products, so the filter runs each of the N^2
entry series through ``scipy.signal.lfilter``; log-dets and quadratic forms
use batched ``numpy.linalg`` calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.signal import lfilter
from scipy.special import gammaln
from scipy.stats import kendalltau, rankdata, t as student_t

from ._base import BaseEstimator
from .errors import (
    BadTailLevel,
    ConstantColumn,
    DegenerateWeights,
    InvalidParams,
    NonConvergence,
    OutOfRangeInput,
    SeriesTooShort,
    SingularCorrelation,
)
from .validation import as_matrix, as_vector, check_lengths, check_square, is_symmetric

__all__ = [
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
]

MIN_FIT_LENGTH = 250
NU_CAP = 50.0
NU_FLOOR = 2.05


# ---------------------------------------------------------------------------
# pseudo-observations
# ---------------------------------------------------------------------------

def pseudo_observations(residuals) -> np.ndarray:
    """Column-wise ranks/(T+1); ties get average ranks; entries in (0, 1)."""
    x = as_matrix(residuals, "residuals")
    if x.shape[0] < 10:
        raise SeriesTooShort(f"need at least 10 rows, got {x.shape[0]}")
    for j in range(x.shape[1]):
        if np.ptp(x[:, j]) == 0.0:
            raise ConstantColumn(f"column {j} is constant; ranks undefined")
    return rankdata(x, axis=0, method="average") / (x.shape[0] + 1.0)


# ---------------------------------------------------------------------------
# correlation matrices
# ---------------------------------------------------------------------------

def nearest_correlation(m: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Symmetrize, clip eigenvalues at ``floor``, rescale to unit diagonal."""
    m = 0.5 * (m + m.T)
    vals, vecs = np.linalg.eigh(m)
    if vals.min() < floor:
        m = (vecs * np.maximum(vals, floor)) @ vecs.T
    d = np.sqrt(np.diag(m))
    out = m / np.outer(d, d)
    np.fill_diagonal(out, 1.0)
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class DccParams:
    """Scalar DCC parameters; CCC is the a = b = 0 special case."""

    a: float
    b: float
    rbar: np.ndarray

    def validate(self) -> "DccParams":
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise InvalidParams("non-finite DCC coefficients")
        if self.a < 0 or self.b < 0 or self.a + self.b >= 1.0:
            raise InvalidParams(f"need a, b >= 0 and a + b < 1, got ({self.a}, {self.b})")
        r = check_square(self.rbar, "rbar")
        if not is_symmetric(r):
            raise InvalidParams("rbar must be symmetric")
        if not np.allclose(np.diag(r), 1.0, atol=1e-8):
            raise InvalidParams("rbar must have a unit diagonal")
        if np.linalg.eigvalsh(r).min() <= 1e-10:
            raise InvalidParams("rbar must be positive definite")
        return self


def _sample_correlation(z: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.corrcoef(z, rowvar=False)
    if not np.all(np.isfinite(c)):
        raise SingularCorrelation("sample correlation undefined (constant column?)")
    return c


def _dcc_q_path(a: float, b: float, rbar: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Q_1 = rbar; Q_t for t >= 2 via a linear IIR filter over the entries."""
    T, n = z.shape
    q = np.empty((T, n, n))
    q[0] = rbar
    if T > 1:
        outer = z[:-1, :, None] * z[:-1, None, :]
        x = (1.0 - a - b) * rbar[None] + a * outer
        zi = b * rbar.reshape(1, -1)
        rest, _ = lfilter([1.0], [1.0, -b], x.reshape(T - 1, -1), axis=0, zi=zi)
        q[1:] = rest.reshape(T - 1, n, n)
    return q


def _normalize_q(q: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.einsum("tii->ti", q))
    return q / (d[:, :, None] * d[:, None, :])


def _dcc_partial_loglik(a: float, b: float, rbar: np.ndarray, z: np.ndarray) -> float:
    r = _normalize_q(_dcc_q_path(a, b, rbar, z))
    sign, logdet = np.linalg.slogdet(r)
    if np.any(sign <= 0):
        return -np.inf
    quad = np.einsum("ti,ti->t", z, np.linalg.solve(r, z[:, :, None])[:, :, 0])
    return -0.5 * float(np.sum(logdet + quad - np.einsum("ti,ti->t", z, z)))


def fit_correlation(std_residuals, mode: str = "dcc") -> DccParams:
    """CCC (sample correlation) or DCC by two-step correlation targeting.

    Step one fixes Qbar at the sample correlation; step two maximizes the
    Gaussian quasi-likelihood over (a, b) in a transformed space.
    """
    z = as_matrix(std_residuals, "std_residuals")
    if z.shape[1] < 2:
        raise SingularCorrelation(f"need at least 2 assets, got {z.shape[1]}")
    if z.shape[0] < MIN_FIT_LENGTH:
        raise SeriesTooShort(f"need at least {MIN_FIT_LENGTH} rows, got {z.shape[0]}")
    if mode not in {"ccc", "dcc"}:
        raise ValueError(f"mode must be 'ccc' or 'dcc', got {mode!r}")
    rbar = nearest_correlation(_sample_correlation(z))
    if mode == "ccc":
        return DccParams(0.0, 0.0, rbar).validate()

    def sigmoid(x):
        return 1.0 / (1.0 + np.exp(-x))

    def unpack(v):
        s = sigmoid(v[0])
        share = sigmoid(v[1])
        return s * share, s * (1.0 - share)

    def objective(v):
        a, b = unpack(v)
        ll = _dcc_partial_loglik(a, b, rbar, z)
        return -ll if np.isfinite(ll) else 1e10

    def logit(p):
        return float(np.log(p / (1.0 - p)))

    starts = [
        np.array([logit(a + b), logit(a / (a + b))])
        for a, b in [(0.03, 0.95), (0.05, 0.90), (0.02, 0.85), (0.10, 0.80)]
    ]
    best = None
    with np.errstate(over="ignore", invalid="ignore"):
        for x0 in starts:
            res = minimize(objective, x0, method="L-BFGS-B", options={"maxiter": 200})
            if np.isfinite(res.fun) and res.fun < 1e10 and (best is None or res.fun < best.fun):
                best = res
    if best is None:
        raise NonConvergence("DCC quasi-likelihood found no usable optimum")
    a, b = unpack(best.x)
    return DccParams(float(a), float(b), rbar).validate()


def dcc_filter(params: DccParams, std_residuals, return_q: bool = False):
    """Conditional correlation path R_t (and optionally the Q path)."""
    params.validate()
    z = as_matrix(std_residuals, "std_residuals")
    if z.shape[1] != params.rbar.shape[0]:
        raise InvalidParams(
            f"params are {params.rbar.shape[0]}-dimensional, residuals have {z.shape[1]} columns"
        )
    q = _dcc_q_path(params.a, params.b, params.rbar, z)
    r = _normalize_q(q)
    return (r, q) if return_q else r


# ---------------------------------------------------------------------------
# t copula
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TCopulaParams:
    corr: np.ndarray
    nu: float

    def validate(self) -> "TCopulaParams":
        c = check_square(self.corr, "corr")
        if not is_symmetric(c) or not np.allclose(np.diag(c), 1.0, atol=1e-8):
            raise InvalidParams("copula correlation must be symmetric with unit diagonal")
        if np.linalg.eigvalsh(c).min() <= 0:
            raise InvalidParams("copula correlation must be positive definite")
        if not 2.0 < self.nu <= NU_CAP:
            raise InvalidParams(f"nu must lie in (2, {NU_CAP}], got {self.nu}")
        return self


def _t_copula_loglik(u: np.ndarray, corr: np.ndarray, nu: float) -> float:
    x = student_t.ppf(u, df=nu)
    n = corr.shape[0]
    sign, logdet = np.linalg.slogdet(corr)
    if sign <= 0:
        return -np.inf
    quad = np.einsum("ti,ti->t", x, np.linalg.solve(corr, x.T).T)
    joint = (
        gammaln((nu + n) / 2.0)
        + (n - 1) * gammaln(nu / 2.0)
        - n * gammaln((nu + 1) / 2.0)
        - 0.5 * logdet
        - (nu + n) / 2.0 * np.log1p(quad / nu)
        + (nu + 1) / 2.0 * np.sum(np.log1p(x**2 / nu), axis=1)
    )
    return float(np.sum(joint))


def fit_t_copula(uniforms) -> TCopulaParams:
    """Kendall-tau inversion for the correlation, profile MLE for nu (capped)."""
    u = as_matrix(uniforms, "uniforms")
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise OutOfRangeInput("pseudo-observations must lie strictly in (0, 1)")
    T, n = u.shape
    if T < MIN_FIT_LENGTH:
        raise SeriesTooShort(f"need at least {MIN_FIT_LENGTH} rows, got {T}")
    rho = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            res = kendalltau(u[:, i], u[:, j])
            tau = float(getattr(res, "statistic", res[0]))
            rho[i, j] = rho[j, i] = np.sin(0.5 * np.pi * tau)
    corr = nearest_correlation(rho)

    grid = np.array([2.1, 2.5, 3, 4, 5, 6, 8, 10, 12, 15, 20, 25, 30, 40, 50.0])
    with np.errstate(over="ignore", invalid="ignore"):
        lls = np.array([_t_copula_loglik(u, corr, nu) for nu in grid])
    if not np.any(np.isfinite(lls)):
        raise NonConvergence("copula likelihood not finite on the nu grid")
    k = int(np.nanargmax(np.where(np.isfinite(lls), lls, -np.inf)))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    if lo == hi:
        nu_hat = float(grid[k])
    else:
        res = minimize_scalar(
            lambda v: -_t_copula_loglik(u, corr, float(v)),
            bounds=(max(NU_FLOOR, lo), min(NU_CAP, hi)),
            method="bounded",
            options={"xatol": 1e-3},
        )
        nu_hat = float(res.x) if np.isfinite(res.fun) else float(grid[k])
        if -res.fun < lls[k]:
            nu_hat = float(grid[k])
    if nu_hat > NU_CAP - 0.05:
        nu_hat = NU_CAP
    return TCopulaParams(corr, float(nu_hat)).validate()


def t_tail_dependence(params: TCopulaParams) -> np.ndarray:
    """Closed-form lower/upper tail-dependence matrix of a t copula."""
    params.validate()
    rho = np.clip(params.corr, -1.0, 1.0)
    with np.errstate(divide="ignore"):
        arg = -np.sqrt((params.nu + 1.0) * (1.0 - rho) / (1.0 + rho))
    lam = 2.0 * student_t.cdf(arg, df=params.nu + 1.0)
    np.fill_diagonal(lam, 1.0)
    return lam


def empirical_tail_dependence(u, v, q: float) -> float:
    """P(U <= q, V <= q)/q estimated by counting."""
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    check_lengths(u, v, names="u and v")
    if not 0.0 < q < 0.5:
        raise BadTailLevel(f"tail level must lie in (0, 0.5), got {q}")
    return float(np.mean((u <= q) & (v <= q)) / q)


def empirical_tail_matrix(values, q: float = 0.05) -> np.ndarray:
    """Pairwise lower-tail coincidence counts on rank-transformed columns."""
    values = np.asarray(values, dtype=float)
    n, k = values.shape
    u = rankdata(values, axis=0) / (n + 1.0)
    lam = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            lam[i, j] = lam[j, i] = empirical_tail_dependence(u[:, i], u[:, j], q)
    return lam


# ---------------------------------------------------------------------------
# weighted pairwise aggregates
# ---------------------------------------------------------------------------

def weighted_pairwise(weights, vols, pairwise) -> float:
    """Vol-and-weight-weighted average of the off-diagonal pairwise entries.

    With a correlation matrix this is the portfolio's weighted pairwise
    correlation; with a tail-dependence matrix, its weighted tail dependence.
    """
    w = as_vector(weights, "weights")
    s = as_vector(vols, "vols")
    m = check_square(pairwise, "pairwise")
    check_lengths(w, s, m, names="weights/vols/pairwise")
    if np.any(w < 0) or np.any(s < 0):
        raise ValueError("weights and vols must be nonnegative")
    if not is_symmetric(m):
        raise ValueError("pairwise matrix must be symmetric")
    ws = w * s
    if np.count_nonzero(ws > 0) < 2:
        raise DegenerateWeights("need at least two strictly positive weight*vol products")
    cross = np.outer(ws, ws)
    iu = np.triu_indices(len(w), k=1)
    denom = float(cross[iu].sum())
    if denom == 0.0:
        raise DegenerateWeights("pairwise denominator is zero")
    return float((cross[iu] * m[iu]).sum() / denom)


# ---------------------------------------------------------------------------
# estimator facades
# ---------------------------------------------------------------------------

class DccCorrelation(BaseEstimator):
    """Conditional-correlation estimator; ``mode='ccc'`` pins a = b = 0."""

    def __init__(self, mode: str = "dcc"):
        self.mode = mode

    def fit(self, std_residuals) -> "DccCorrelation":
        self.params_ = fit_correlation(std_residuals, mode=self.mode)
        return self

    def filter(self, std_residuals, return_q: bool = False):
        self._check_fitted("params_")
        return dcc_filter(self.params_, std_residuals, return_q=return_q)


class TCopula(BaseEstimator):
    """t-copula estimator: Kendall-tau correlation, profile-MLE nu."""

    def fit(self, uniforms) -> "TCopula":
        self.params_ = fit_t_copula(uniforms)
        return self

    def tail_dependence(self) -> np.ndarray:
        self._check_fitted("params_")
        return t_tail_dependence(self.params_)

    def sample(self, n: int, seed: int) -> np.ndarray:
        """Uniform draws from the fitted copula (Gaussian/chi-square mixture)."""
        self._check_fitted("params_")
        p = self.params_
        rng = np.random.Generator(np.random.Philox(key=int(seed)))
        z = rng.standard_normal((int(n), p.corr.shape[0]))
        w = rng.chisquare(p.nu, size=int(n)) / p.nu
        x = (z @ np.linalg.cholesky(p.corr).T) / np.sqrt(w)[:, None]
        return student_t.cdf(x, df=p.nu)
