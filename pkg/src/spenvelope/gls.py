"""Full (unreduced) spatial regression under the separable joint model.

Everything here works with *adjusted* sample covariances: GLS-residual
cross-products taken against rho(phi)^{-1},

    S_X(phi)   = (X - fitted on [1])'    rho^{-1} (X - fitted on [1])
    S_Y(phi)   = (Y - fitted on [1])'    rho^{-1} (Y - fitted on [1])
    S_X|Y(phi) = (X - fitted on [1, Y])' rho^{-1} (X - fitted on [1, Y]),

kept unnormalized (no division by n).  Fitting the full model profiles all
mean and covariance parameters out of the joint Gaussian likelihood of
Z = [Y X], leaving a 2-parameter surface over theta = (tau, lambda) that is
maximized by a derivative-free simplex search on (logit tau, log lambda).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .errors import DimensionError, OptimFailure, RankDeficiency
from .spatial import (
    CorrelationFactor,
    CorrelationParams,
    SpatialDataset,
    build_correlation,
)

__all__ = [
    "AdjustedCovariances",
    "GlsFit",
    "OptimOptions",
    "adjusted_covariances",
    "gls_coefficients",
    "fit_full_model",
    "known_theta_variances",
    "full_model_param_count",
]

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class OptimOptions:
    """Knobs for the numerical optimizers, exposed through the CLI.

    budget caps objective evaluations for the joint envelope search;
    theta_budget caps the 2-parameter simplex profiles.  multistart picks how
    many basis initializations fit_spe tries (1 = leading eigenvectors only,
    2 = + GLS coefficient directions, 3 = + one random orthonormal draw).
    n_jobs parallelizes per-u, per-fold and per-replicate loops.
    """

    budget: int = 5000
    theta_budget: int = 2000
    tol: float = 1e-8
    multistart: int = 3
    seed: int = 0
    n_jobs: int = 1


@dataclass(frozen=True)
class AdjustedCovariances:
    """The three quadratic forms at a given phi, plus the cross-scatter.

    All matrices are unnormalized scatter matrices; divide by n for
    covariance-scale estimates.
    """

    S_X: np.ndarray
    S_Y: np.ndarray
    S_XgY: np.ndarray
    S_XY: np.ndarray
    log_det_rho: float
    n: int


@dataclass(frozen=True)
class GlsFit:
    """Maximum-likelihood full spatial regression."""

    mu_YgX: np.ndarray
    beta: np.ndarray
    Sigma_YgX: np.ndarray
    theta: CorrelationParams
    loglik: float
    param_count: int
    n: int

    @property
    def aic(self) -> float:
        return -2.0 * self.loglik + 2.0 * self.param_count

    @property
    def bic(self) -> float:
        return -2.0 * self.loglik + self.param_count * np.log(self.n)


def _residual_scatter(V: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Scatter of V after projecting out span(basis), in whitened coordinates."""
    gram = basis.T @ basis
    try:
        coef = np.linalg.solve(gram, basis.T @ V)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiency("projection basis has singular Gram matrix") from exc
    resid = V - basis @ coef
    scatter = resid.T @ resid
    return 0.5 * (scatter + scatter.T)


def adjusted_covariances(
    data: SpatialDataset,
    phi: CorrelationParams,
    factor: CorrelationFactor | None = None,
) -> AdjustedCovariances:
    """Compute S_X(phi), S_Y(phi), S_X|Y(phi) and the X-Y cross-scatter.

    A prebuilt CorrelationFactor for phi can be passed to skip the Cholesky.

    Raises
    ------
    SingularCorrelation
        If rho(phi) cannot be factored.
    RankDeficiency
        If [1 Y]' rho^{-1} [1 Y] (or the intercept Gram) is singular.
    """
    if factor is None:
        factor = build_correlation(data.sites, phi)
    n = data.n
    W = factor.whiten(np.column_stack([np.ones(n), data.Y, data.X]))
    v1 = W[:, :1]
    Vy = W[:, 1 : 1 + data.r]
    Vx = W[:, 1 + data.r :]

    S_X = _residual_scatter(Vx, v1)
    S_Y = _residual_scatter(Vy, v1)
    S_XgY = _residual_scatter(Vx, np.column_stack([v1, Vy]))

    # Cross-scatter of intercept-adjusted X and Y (the GLS analogue of the
    # centered cross-product); handy for coefficient-based initializations.
    proj = np.linalg.solve(v1.T @ v1, v1.T @ W[:, 1:])
    resid = W[:, 1:] - v1 @ proj
    S_XY = resid[:, data.r :].T @ resid[:, : data.r]

    return AdjustedCovariances(
        S_X=S_X, S_Y=S_Y, S_XgY=S_XgY, S_XY=S_XY, log_det_rho=factor.log_det, n=n
    )


def gls_coefficients(
    data: SpatialDataset,
    theta: CorrelationParams,
    factor: CorrelationFactor | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """GLS intercept and coefficients (Xt' rho^{-1} Xt)^{-1} Xt' rho^{-1} Y.

    Returns (mu_YgX, beta) with mu_YgX of length r and beta p x r.
    """
    if data.n < data.p + 1:
        raise RankDeficiency(f"need n >= p+1, got n={data.n}, p={data.p}")
    if factor is None:
        factor = build_correlation(data.sites, theta)
    Xt = factor.whiten(np.column_stack([np.ones(data.n), data.X]))
    Yw = factor.whiten(data.Y)
    gram = Xt.T @ Xt
    try:
        coef = np.linalg.solve(gram, Xt.T @ Yw)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiency("Xt' rho^{-1} Xt is singular") from exc
    return coef[0, :].copy(), coef[1:, :].copy()


def joint_profile_loglik(
    data: SpatialDataset,
    phi: CorrelationParams,
    factor: CorrelationFactor | None = None,
) -> float:
    """Joint Gaussian log-likelihood of Z = [Y X] with means and Sigma_Z profiled out.

    Equals -(n/2) log|S_Z(phi)/n| - (k/2) log|rho(phi)| - (nk/2)(log 2pi + 1)
    where S_Z is the intercept-adjusted scatter of Z against rho(phi)^{-1}.
    """
    if factor is None:
        factor = build_correlation(data.sites, phi)
    n, k = data.n, data.r + data.p
    W = factor.whiten(np.column_stack([np.ones(n), data.Y, data.X]))
    S_Z = _residual_scatter(W[:, 1:], W[:, :1])
    sign, logdet = np.linalg.slogdet(S_Z / n)
    if sign <= 0:
        raise RankDeficiency("adjusted scatter of [Y X] is singular")
    return -0.5 * n * logdet - 0.5 * k * factor.log_det - 0.5 * n * k * (LOG_2PI + 1.0)


def _to_unconstrained(theta: CorrelationParams) -> np.ndarray:
    tau = np.clip(theta.tau, 1e-12, 1.0 - 1e-12)
    return np.array([logit(tau), np.log(theta.lam)])


def _from_unconstrained(x: np.ndarray) -> CorrelationParams:
    return CorrelationParams(tau=float(expit(x[0])), lam=float(np.exp(x[1])))


def _simplex_with_restart(fun, x0: np.ndarray, budget: int, tol: float):
    """Nelder-Mead, then one restart from the found point; returns the best result."""
    opts = {"maxfev": max(budget // 2, 50), "fatol": tol, "xatol": 1e-10}
    res1 = minimize(fun, x0, method="Nelder-Mead", options=opts)
    res2 = minimize(fun, res1.x, method="Nelder-Mead", options=opts)
    return res2 if res2.fun <= res1.fun else res1


def default_theta_start(data: SpatialDataset) -> CorrelationParams:
    """tau = 0.5 and lambda = median nonzero site distance (or 1 if degenerate)."""
    d = data.sites.distance_matrix()
    pos = d[np.triu_indices(data.n, k=1)]
    pos = pos[pos > 0]
    lam0 = float(np.median(pos)) if pos.size else 1.0
    return CorrelationParams(tau=0.5, lam=max(lam0, 1e-6))


def full_model_param_count(p: int, r: int) -> int:
    """Means + vech Sigma_Z + the two correlation parameters."""
    k = p + r
    return k + k * (k + 1) // 2 + 2


def fit_full_model(data: SpatialDataset, opts: OptimOptions | None = None) -> GlsFit:
    """Maximize the joint likelihood of [Y X] over (tau, lambda).

    All mean and covariance parameters are profiled out analytically, so the
    search runs over the 2-vector (logit tau, log lambda) only.

    Raises
    ------
    OptimFailure
        If the simplex search cannot produce a finite optimum in budget.
    """
    if opts is None:
        opts = OptimOptions()
    if data.n <= data.p + data.r + 1:
        raise RankDeficiency(
            f"need n > p + r + 1, got n={data.n}, p={data.p}, r={data.r}"
        )

    def negloglik(x):
        if not np.all(np.isfinite(x)) or abs(x[0]) > 60 or abs(x[1]) > 60:
            return 1e12
        try:
            return -joint_profile_loglik(data, _from_unconstrained(x))
        except Exception:
            return 1e12

    x0 = _to_unconstrained(default_theta_start(data))
    res = _simplex_with_restart(negloglik, x0, opts.theta_budget, opts.tol)
    if not np.isfinite(res.fun) or res.fun >= 1e12:
        raise OptimFailure("full-model profile likelihood had no finite optimum")

    theta_hat = _from_unconstrained(res.x)
    factor = build_correlation(data.sites, theta_hat)
    mu, beta = gls_coefficients(data, theta_hat, factor=factor)
    cov = adjusted_covariances(data, theta_hat, factor=factor)
    # Residual covariance of Y given [1 X]: Schur complement of the adjusted
    # joint scatter, normalized to the covariance scale.
    S_YgX = cov.S_Y - cov.S_XY.T @ np.linalg.solve(cov.S_X, cov.S_XY)
    return GlsFit(
        mu_YgX=mu,
        beta=beta,
        Sigma_YgX=0.5 * (S_YgX + S_YgX.T) / data.n,
        theta=theta_hat,
        loglik=-float(res.fun),
        param_count=full_model_param_count(data.p, data.r),
        n=data.n,
    )


def known_theta_variances(
    basis,
    Omega1: np.ndarray,
    Omega0: np.ndarray,
    Sigma_YgX: np.ndarray,
    n: int,
    u: int,
    p: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Finite-sample variances of vec(beta-hat) with basis and theta known.

    Returns the pair (var_spe, var_gls):

        var_spe = Sigma_Y|X (x) Gamma1 Omega1^{-1} Gamma1' / (n - u - 2)
        var_gls = Sigma_Y|X (x) Sigma_X^{-1}          / (n - p - 2)

    and internally verifies the rearrangement

        var_spe = ((n-p-2)/(n-u-2)) var_gls
                  - Sigma_Y|X (x) Gamma0 Omega0^{-1} Gamma0' / (n - u - 2)

    to 1e-10, which pins the three formulas to each other.
    """
    if n <= p + 2:
        raise DimensionError(f"need n > p + 2, got n={n}, p={p}")
    G1 = np.asarray(basis.Gamma1, dtype=float)
    G0 = np.asarray(basis.Gamma0, dtype=float)
    if G1.shape != (p, u) or G0.shape != (p, p - u):
        raise DimensionError(
            f"basis shapes {G1.shape}, {G0.shape} inconsistent with p={p}, u={u}"
        )
    Omega1 = np.atleast_2d(np.asarray(Omega1, dtype=float))
    Omega0 = np.atleast_2d(np.asarray(Omega0, dtype=float))
    Sigma_YgX = np.atleast_2d(np.asarray(Sigma_YgX, dtype=float))

    proj1 = G1 @ np.linalg.solve(Omega1, G1.T) if u > 0 else np.zeros((p, p))
    proj0 = G0 @ np.linalg.solve(Omega0, G0.T) if u < p else np.zeros((p, p))
    Sigma_X = (G1 @ Omega1 @ G1.T if u > 0 else 0.0) + (
        G0 @ Omega0 @ G0.T if u < p else 0.0
    )

    var_spe = np.kron(Sigma_YgX, proj1) / (n - u - 2)
    var_gls = np.kron(Sigma_YgX, np.linalg.inv(Sigma_X)) / (n - p - 2)

    rearranged = ((n - p - 2) / (n - u - 2)) * var_gls - np.kron(Sigma_YgX, proj0) / (
        n - u - 2
    )
    if not np.allclose(var_spe, rearranged, atol=1e-10 * max(1.0, np.abs(var_spe).max())):
        raise DimensionError(
            "variance rearrangement identity failed; basis is not an orthonormal "
            "envelope decomposition"
        )
    return var_spe, var_gls
