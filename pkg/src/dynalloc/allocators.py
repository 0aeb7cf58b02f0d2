"""Long-only fully-invested portfolio construction.

All allocators optimize over the simplex {w : sum(w) = 1, w >= 0} and return
a :class:`Weights`. Quadratic objectives go through one active-set solver;
CVaR objectives go through one Rockafellar-Uryasev linear program, reused by
the fractional (return over CVaR) program via Dinkelbach iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import (
    InfeasibleLP,
    NonConvergence,
    NotPD,
    NotPSD,
    SampleTooSmall,
    WeightSumError,
    ZeroVol,
)
from .scenarios import simulate_scenarios
from .validation import as_matrix, as_vector, check_alpha, check_square

__all__ = [
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
]

MIN_SCENARIOS = 100
LP_SCENARIO_CAP = 2000
PSD_REPAIR_TOL = -1e-10
WEIGHT_FLOOR = -1e-10


@dataclass(frozen=True)
class Weights:
    """Simplex-feasible allocation fractions.

    ``values`` must sum to 1 within 1e-8 with entries no more negative than
    -1e-10; construction clips the dust to zero and renormalizes exactly.
    ``flags`` records documented fallbacks taken by the producing allocator.
    """

    values: np.ndarray
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size == 0:
            raise WeightSumError("weights need at least one asset")
        if not np.all(np.isfinite(v)):
            raise WeightSumError("weights contain non-finite values")
        if v.min() < WEIGHT_FLOOR:
            raise WeightSumError(f"negative weight {v.min():.3e} beyond tolerance")
        if abs(v.sum() - 1.0) > 1e-8:
            raise WeightSumError(f"weights sum to {v.sum()!r}, expected 1")
        v = np.clip(v, 0.0, None)
        v = v / v.sum()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "flags", tuple(self.flags))

    def __len__(self) -> int:
        return len(self.values)


def naive_weights(n_or_vols, mode: str = "equal") -> Weights:
    """Equal or inverse-volatility weights.

    ``equal`` accepts an asset count or any sequence (its length is used);
    ``inverse_vol`` requires strictly positive volatilities.
    """
    if mode == "equal":
        n = n_or_vols if isinstance(n_or_vols, (int, np.integer)) else len(n_or_vols)
        if n < 1:
            raise ValueError("need at least one asset")
        return Weights(np.full(n, 1.0 / n))
    if mode == "inverse_vol":
        vols = as_vector(n_or_vols, "vols")
        if np.any(vols <= 0):
            raise ZeroVol("inverse_vol requires every volatility > 0")
        inv = 1.0 / vols
        return Weights(inv / inv.sum())
    raise ValueError(f"unknown mode {mode!r}")


def _active_set_qp(m: np.ndarray, eq: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """min x'Mx  s.t. eq @ x = rhs, x >= 0, by support enumeration.

    Exact for PSD M up to linear algebra: solve the equality-restricted KKT
    system on the current support, drop the most negative coordinate while
    any is negative, then add the worst dual violator until none remains.
    """
    n = m.shape[0]
    n_eq = eq.shape[0]
    support = np.ones(n, dtype=bool)
    x = np.zeros(n)
    for _ in range(50 * n + 50):
        idx = np.flatnonzero(support)
        k = len(idx)
        kkt = np.zeros((k + n_eq, k + n_eq))
        kkt[:k, :k] = 2.0 * m[np.ix_(idx, idx)]
        kkt[:k, k:] = eq[:, idx].T
        kkt[k:, :k] = eq[:, idx]
        target = np.concatenate([np.zeros(k), rhs])
        sol, *_ = np.linalg.lstsq(kkt, target, rcond=None)
        xs, lam = sol[:k], sol[k:]
        if np.max(np.abs(eq[:, idx] @ xs - rhs)) > 1e-8:
            raise NonConvergence("equality constraints unsatisfiable on the support")
        if xs.min() < -1e-12:
            if k == 1:
                raise NonConvergence("active set emptied without a feasible point")
            support[idx[np.argmin(xs)]] = False
            continue
        x = np.zeros(n)
        x[idx] = np.clip(xs, 0.0, None)
        off = np.flatnonzero(~support)
        if len(off) == 0:
            return x
        # the KKT solve returns the negated multiplier, hence the plus sign
        duals = 2.0 * (m[off] @ x) + eq[:, off].T @ lam
        worst = np.argmin(duals)
        if duals[worst] >= -1e-10:
            return x
        support[off[worst]] = True
    raise NonConvergence("active-set iteration limit reached")


def _repair_psd(m: np.ndarray) -> np.ndarray:
    m = check_square(m, "matrix")
    m = 0.5 * (m + m.T)
    vals, vecs = np.linalg.eigh(m)
    if vals.min() < PSD_REPAIR_TOL * max(1.0, abs(vals.max())):
        raise NotPSD(f"matrix has eigenvalue {vals.min():.3e}")
    if vals.min() < 0.0:
        m = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
    return m


def _check_pd(cov: np.ndarray, name: str = "cov") -> np.ndarray:
    cov = check_square(cov, name)
    cov = 0.5 * (cov + cov.T)
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise NotPD(f"{name} is not positive definite") from None
    return cov


def quadratic_min(m) -> Weights:
    """argmin of w'Mw over the simplex for a PSD matrix M.

    Serves minimum variance (M the covariance), minimum variance-tail
    dependence (M_ij = sigma_i sigma_j lambda_ij) and minimum weighted tail
    dependence (M the tail-dependence matrix) with one solver.
    """
    m = _repair_psd(m)
    n = m.shape[0]
    if n == 1:
        return Weights(np.ones(1))
    w = _active_set_qp(m, np.ones((1, n)), np.array([1.0]))
    return Weights(w)


def risk_parity(cov, tol: float = 1e-10, max_cycles: int = 5000) -> Weights:
    """Equal-risk-contribution weights by cyclical coordinate descent.

    Each coordinate update solves its scalar contribution equation exactly
    (the positive root of the per-coordinate quadratic). The returned
    weights are self-checked: contributions must agree within 1e-8 relative.
    """
    cov = _check_pd(cov)
    n = cov.shape[0]
    if n == 1:
        return Weights(np.ones(1))
    x = 1.0 / np.sqrt(np.diag(cov))
    sx = cov @ x
    for _ in range(max_cycles):
        for i in range(n):
            rest = sx[i] - cov[i, i] * x[i]
            new = (-rest + np.sqrt(rest * rest + 4.0 * cov[i, i])) / (2.0 * cov[i, i])
            sx += cov[:, i] * (new - x[i])
            x[i] = new
        contrib = x * sx
        spread = contrib.max() - contrib.min()
        if spread <= tol * contrib.mean():
            break
    w = x / x.sum()
    contrib = w * (cov @ w)
    if (contrib.max() - contrib.min()) > 1e-8 * contrib.mean():
        raise NonConvergence("risk contributions failed to equalize")
    return Weights(w)


def max_diversification(cov) -> Weights:
    """argmax of the diversification ratio w'sigma / sqrt(w'Sigma w).

    Solved exactly as minimum variance on the correlation matrix followed by
    the change of variables w_i propto w̃_i / sigma_i.
    """
    cov = _check_pd(cov)
    if cov.shape[0] == 1:
        return Weights(np.ones(1))
    sig = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sig, sig)
    base = quadratic_min(corr).values
    w = base / sig
    return Weights(w / w.sum())


def diversification_ratio(weights, cov) -> float:
    """w'sigma over portfolio volatility; 1 for a single asset."""
    w = weights.values if isinstance(weights, Weights) else as_vector(weights, "weights")
    cov = check_square(cov, "cov")
    port_var = float(w @ cov @ w)
    if port_var <= 0:
        raise ZeroVol("portfolio variance is zero")
    return float(w @ np.sqrt(np.diag(cov))) / np.sqrt(port_var)


def risk_contributions(weights, cov) -> np.ndarray:
    """Per-asset variance contributions c_i = w_i (Sigma w)_i; sums to w'Sigma w."""
    w = weights.values if isinstance(weights, Weights) else as_vector(weights, "weights")
    cov = check_square(cov, "cov")
    return w * (cov @ w)


def _lp_scenarios(scenarios) -> np.ndarray:
    r = as_matrix(scenarios, "scenarios")
    if r.shape[0] < MIN_SCENARIOS:
        raise SampleTooSmall(f"CVaR objectives need {MIN_SCENARIOS} scenarios, got {r.shape[0]}")
    if r.shape[0] > LP_SCENARIO_CAP:
        keep = np.random.default_rng(0).permutation(r.shape[0])[:LP_SCENARIO_CAP]
        r = r[keep]
    return r


def _ru_cvar(sample: np.ndarray, alpha: float) -> float:
    """Exact optimum of the Rockafellar-Uryasev functional on one sample."""
    losses = np.sort(-np.asarray(sample, dtype=float))[::-1]
    tail = (1.0 - alpha) * len(losses)
    gamma = losses[int(np.ceil(tail - 1e-9)) - 1]
    return float(gamma + np.maximum(losses - gamma, 0.0).sum() / tail)


def _cvar_lp(r: np.ndarray, alpha: float, objective_w: np.ndarray, cvar_coeff: float,
             floor: tuple[np.ndarray, float] | None = None) -> tuple[np.ndarray, float]:
    """Solve min cvar_coeff*CVaR(w) + objective_w'w over the simplex.

    Rockafellar-Uryasev variables (w, gamma, u); returns (w, CVaR at w).
    ``floor`` = (vector, target) adds vector'w >= target for frontier sweeps.
    """
    s, n = r.shape
    tail = (1.0 - alpha) * s
    cost = np.concatenate([objective_w, [cvar_coeff], np.full(s, cvar_coeff / tail)])
    a_ub = sparse.hstack(
        [sparse.csr_matrix(-r), -np.ones((s, 1)), -sparse.eye(s, format="csr")],
        format="csr",
    )
    b_ub = np.zeros(s)
    if floor is not None:
        vec, target = floor
        floor_row = sparse.csr_matrix(np.concatenate([-vec, np.zeros(1 + s)])[None, :])
        a_ub = sparse.vstack([a_ub, floor_row], format="csr")
        b_ub = np.concatenate([b_ub, [-target]])
    a_eq = sparse.csr_matrix(np.concatenate([np.ones(n), np.zeros(1 + s)])[None, :])
    bounds = [(0, None)] * n + [(None, None)] + [(0, None)] * s
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                  bounds=bounds, method="highs")
    if not res.success:
        raise InfeasibleLP(f"LP failed with status {res.status}: {res.message}")
    w = res.x[:n]
    cvar = float(res.x[n] + res.x[n + 1 :].sum() / tail)
    return w, cvar


def min_cvar(scenarios, alpha: float = 0.95) -> Weights:
    """Minimum-CVaR weights from a scenario matrix of horizon returns.

    Exact linear-program solve; scenario sets larger than 2,000 rows are
    deterministically subsampled (seed-0 shuffle, first 2,000) before the
    solve, which changes results slightly versus the full set. The optimum
    objective coincides with ``risk_measures`` evaluated on the returned
    portfolio because both compute the same discrete functional.
    """
    alpha = check_alpha(alpha)
    r = _lp_scenarios(scenarios)
    if r.shape[1] == 1:
        return Weights(np.ones(1))
    w, _ = _cvar_lp(r, alpha, np.zeros(r.shape[1]), 1.0)
    return Weights(w)


def max_sharpe(expected, cov) -> Weights:
    """argmax of w'r over portfolio volatility on the simplex.

    Transformed to the quadratic program min y'Sigma y subject to y'r = 1,
    y >= 0, then renormalized. When every expected return is nonpositive the
    ratio has no positive maximizer; the documented fallback is minimum
    variance, tagged with the ``fallback_min_variance`` flag.
    """
    r = as_vector(expected, "expected")
    cov = _check_pd(cov)
    if len(r) != cov.shape[0]:
        raise ValueError(f"{len(r)} expected returns vs covariance {cov.shape}")
    if len(r) == 1:
        return Weights(np.ones(1))
    if r.max() <= 0.0:
        base = quadratic_min(cov)
        return Weights(base.values, flags=base.flags + ("fallback_min_variance",))
    y = _active_set_qp(cov, r[None, :], np.array([1.0]))
    return Weights(y / y.sum())


def max_return_cvar(expected, scenarios, alpha: float = 0.95) -> Weights:
    """argmax of expected return over CVaR by Dinkelbach iterations.

    Repeatedly solves max w'r - q*CVaR(w) (the min-CVaR linear program with
    a linear term) and updates q to the achieved ratio; convergence is
    declared when the ratio moves by less than 1e-8 or after 50 rounds.
    Falls back to plain min-CVaR (``fallback_min_cvar`` flag) when every
    expected return is nonpositive.
    """
    alpha = check_alpha(alpha)
    rhat = as_vector(expected, "expected")
    r = _lp_scenarios(scenarios)
    if len(rhat) != r.shape[1]:
        raise ValueError(f"{len(rhat)} expected returns vs scenarios {r.shape}")
    if r.shape[1] == 1:
        return Weights(np.ones(1))
    if rhat.max() <= 0.0:
        w, _ = _cvar_lp(r, alpha, np.zeros(r.shape[1]), 1.0)
        return Weights(w, flags=("fallback_min_cvar",))

    # start from the best single positive-return asset
    best = int(np.argmax(rhat))
    e_best = np.zeros(len(rhat))
    e_best[best] = 1.0
    denom = _ru_cvar(r[:, best], alpha)
    if denom <= 1e-12:
        raise NonConvergence("a scenario portfolio has nonpositive CVaR; ratio unbounded")
    q = rhat[best] / denom
    w = e_best
    for _ in range(50):
        w_new, cvar = _cvar_lp(r, alpha, -rhat, q)
        if cvar <= 1e-12:
            raise NonConvergence("a scenario portfolio has nonpositive CVaR; ratio unbounded")
        q_new = float(rhat @ w_new) / cvar
        w = w_new
        if abs(q_new - q) < 1e-8:
            q = q_new
            break
        q = q_new
    return Weights(w)


def resampled_weights(optimizer, model, k: int = 20, master_seed: int = 0,
                      horizon: int = 21, n_paths: int = 10000) -> Weights:
    """Average of ``k`` independent scenario-reoptimized weight vectors.

    Simulates ``k`` scenario sets from ``model`` with seeds derived from
    ``master_seed``, applies ``optimizer`` (a callable taking the S x N
    horizon-return matrix) to each, and averages the weights. Deterministic
    given the master seed; the average of simplex points stays on the simplex.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(master_seed).spawn(k)]
    stack = []
    flags: tuple[str, ...] = ()
    for seed in seeds:
        scen = simulate_scenarios(model, horizon=horizon, n_paths=n_paths, seed=seed)
        w = optimizer(scen.horizon_returns)
        stack.append(w.values)
        flags = flags + tuple(f for f in w.flags if f not in flags)
    return Weights(np.mean(stack, axis=0), flags=flags)


def _min_var_at_return(cov: np.ndarray, expected: np.ndarray, target: float) -> np.ndarray:
    eq = np.vstack([np.ones(len(expected)), expected])
    return _active_set_qp(cov, eq, np.array([1.0, target]))


def efficient_frontier(expected, risk_input, kind: str = "mean_variance",
                       n_points: int = 10, alpha: float = 0.95):
    """Trace (risk, return, Weights) along rising return targets.

    ``mean_variance`` takes a covariance matrix and reports volatility;
    ``mean_cvar`` takes a scenario matrix and reports CVaR. The sweep runs
    from the global minimum-risk portfolio's return to the best single-asset
    expected return, solving a risk minimization with a return floor at each
    target.
    """
    rhat = as_vector(expected, "expected")
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    points = []
    if kind == "mean_variance":
        cov = _check_pd(risk_input)
        if cov.shape[0] != len(rhat):
            raise ValueError("expected returns and covariance disagree on asset count")
        base = quadratic_min(cov).values
        lo, hi = float(rhat @ base), float(rhat.max())
        for target in np.linspace(lo, hi, n_points):
            w = _min_var_at_return(cov, rhat, float(target))
            points.append((float(np.sqrt(w @ cov @ w)), float(rhat @ w), Weights(w)))
        return points
    if kind == "mean_cvar":
        alpha = check_alpha(alpha)
        r = _lp_scenarios(risk_input)
        if r.shape[1] != len(rhat):
            raise ValueError("expected returns and scenarios disagree on asset count")
        base, base_cvar = _cvar_lp(r, alpha, np.zeros(r.shape[1]), 1.0)
        lo, hi = float(rhat @ base), float(rhat.max())
        for target in np.linspace(lo, hi, n_points):
            w, cvar = _cvar_lp(r, alpha, np.zeros(r.shape[1]), 1.0, floor=(rhat, float(target)))
            points.append((cvar, float(rhat @ w), Weights(w)))
        return points
    raise ValueError(f"unknown frontier kind {kind!r}")
