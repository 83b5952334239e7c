"""Maximum-likelihood estimation of the spatial predictor envelope.

For a fixed reduction dimension u, the estimated basis and correlation
parameters minimize

    F(G1, phi) = n log|G1' S_X|Y(phi) G1| + n log|G1' S_X(phi)^{-1} G1|
                 + n log|S_X(phi)| + n log|S_Y(phi)| + (r+p) log|rho(phi)|

over p x u orthonormal G1.  The orthogonality constraint is removed by
writing the rows of G1 (after a pivoting permutation that keeps the leading
u x u block well conditioned) as C_A G11 with C_A = [I_u; A], under which the
objective becomes

    F(A, phi) = n log|C_A' S_X|Y C_A| + n log|C_A' S_X^{-1} C_A|
                - 2n log|C_A' C_A| + (same trailing terms),

an unconstrained problem in ((p-u)u + 2) variables.  A quasi-Newton search
with finite-difference gradients runs on (logit tau, log lambda, vec A) from
several deterministic starts; the adjusted covariances are memoized per phi,
so perturbations of A alone cost only small-matrix determinants.

The fitted objective value converts to a true log-likelihood via

    loglik = -F/2 + (n(p+r)/2) (log n - log(2 pi) - 1),

which makes values comparable across u and against the full-model fit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import qr as scipy_qr
from scipy.optimize import minimize

from ._linalg import haar_orthobasis, qr_orth
from .errors import (
    DimensionError,
    OptimFailure,
    RankDeficiency,
    SingularCovariance,
)
from .gls import (
    LOG_2PI,
    OptimOptions,
    _from_unconstrained,
    _simplex_with_restart,
    _to_unconstrained,
    adjusted_covariances,
    default_theta_start,
    fit_full_model,
    gls_coefficients,
)
from .spatial import CorrelationParams, SpatialDataset, build_correlation

__all__ = [
    "EnvelopeBasis",
    "CoordinateParam",
    "SpeFit",
    "DimensionSelection",
    "spe_objective",
    "spe_objective_unconstrained",
    "recover_basis",
    "fit_spe",
    "select_dimension",
    "spe_param_count",
]

_PENALTY = 1e12


@dataclass(frozen=True)
class EnvelopeBasis:
    """Orthonormal basis of the envelope and its orthogonal complement.

    Gamma1 is p x u, Gamma0 is p x (p-u); u = 0 and u = p give empty blocks.
    Only the spans are identified; any right-rotation represents the same
    model.
    """

    Gamma1: np.ndarray
    Gamma0: np.ndarray

    def __post_init__(self):
        G1 = np.asarray(self.Gamma1, dtype=float).reshape(self.Gamma1.shape)
        G0 = np.asarray(self.Gamma0, dtype=float).reshape(self.Gamma0.shape)
        if G1.ndim != 2 or G0.ndim != 2 or G1.shape[0] != G0.shape[0]:
            raise DimensionError("Gamma1 and Gamma0 must share their row dimension")
        p, u = G1.shape
        if G0.shape[1] != p - u:
            raise DimensionError(f"Gamma0 must be p x (p-u), got {G0.shape}")
        frame = np.column_stack([G1, G0])
        if not np.allclose(frame.T @ frame, np.eye(p), atol=1e-10):
            raise DimensionError("basis columns are not orthonormal to 1e-10")
        object.__setattr__(self, "Gamma1", G1)
        object.__setattr__(self, "Gamma0", G0)

    @property
    def p(self) -> int:
        return self.Gamma1.shape[0]

    @property
    def u(self) -> int:
        return self.Gamma1.shape[1]


@dataclass(frozen=True)
class CoordinateParam:
    """Unconstrained coordinates for a basis: G1[row_order] = [I_u; A] G11."""

    A: np.ndarray
    row_order: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        order = np.asarray(self.row_order, dtype=int)
        p = A.shape[0] + A.shape[1]
        if sorted(order.tolist()) != list(range(p)):
            raise DimensionError("row_order must be a permutation of 0..p-1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "row_order", order)

    @property
    def u(self) -> int:
        return self.A.shape[1]

    @property
    def p(self) -> int:
        return self.A.shape[0] + self.A.shape[1]


@dataclass(frozen=True)
class SpeFit:
    """Fitted spatial predictor envelope at a fixed dimension u."""

    basis: EnvelopeBasis
    eta: np.ndarray
    Omega1: np.ndarray
    Omega0: np.ndarray
    beta: np.ndarray
    mu_YgX: np.ndarray
    mu_X: np.ndarray
    mu_Y: np.ndarray
    Sigma_YgX: np.ndarray
    theta: CorrelationParams
    u: int
    loglik: float
    aic: float
    bic: float
    param_count: int
    n: int
    objective: float
    spatial: bool = True


@dataclass(frozen=True)
class DimensionSelection:
    """Per-u fit table from select_dimension."""

    u_hat: int
    fits: dict
    scores: dict
    criterion: str
    failures: dict


def spe_param_count(p: int, r: int, u: int, spatial: bool = True) -> int:
    """Free parameters: means, Sigma_Y|X, eta, Omega1, Omega0, the Grassmann
    dimension u(p-u) of the envelope, and the two correlation parameters
    (dropped for the independence baseline)."""
    count = (
        (p + r)
        + r * (r + 1) // 2
        + u * r
        + u * (u + 1) // 2
        + (p - u) * (p - u + 1) // 2
        + u * (p - u)
    )
    return count + 2 if spatial else count


# ---------------------------------------------------------------------------
# Objective evaluation
# ---------------------------------------------------------------------------


class _ObjectivePieces:
    """phi-dependent pieces of the objective, memoized per fit."""

    __slots__ = ("S_XgY", "S_X", "S_X_inv", "trailing", "log_det_rho")

    def __init__(self, data: SpatialDataset, phi: CorrelationParams):
        cov = adjusted_covariances(data, phi)
        n, p, r = data.n, data.p, data.r
        sign_x, logdet_x = np.linalg.slogdet(cov.S_X)
        sign_y, logdet_y = np.linalg.slogdet(cov.S_Y)
        if sign_x <= 0 or sign_y <= 0:
            raise SingularCovariance("adjusted scatter matrix is singular")
        self.S_XgY = cov.S_XgY
        self.S_X = cov.S_X
        self.S_X_inv = np.linalg.inv(cov.S_X)
        self.log_det_rho = cov.log_det_rho
        self.trailing = n * logdet_x + n * logdet_y + (r + p) * cov.log_det_rho


def _logdet_pd(M: np.ndarray) -> float:
    if M.shape[0] == 0:
        return 0.0
    sign, val = np.linalg.slogdet(M)
    if sign <= 0 or not np.isfinite(val):
        raise SingularCovariance("determinant argument is not positive definite")
    return val


def _objective_orthonormal(pieces: _ObjectivePieces, G1: np.ndarray, n: int) -> float:
    if G1.shape[1] == 0:
        return pieces.trailing
    t1 = _logdet_pd(G1.T @ pieces.S_XgY @ G1)
    t2 = _logdet_pd(G1.T @ pieces.S_X_inv @ G1)
    return n * t1 + n * t2 + pieces.trailing


def _objective_coordinates(
    pieces: _ObjectivePieces, A: np.ndarray, perm: np.ndarray, n: int
) -> float:
    u = A.shape[1]
    if u == 0:
        return pieces.trailing
    C = np.vstack([np.eye(u), A])
    ix = np.ix_(perm, perm)
    t1 = _logdet_pd(C.T @ pieces.S_XgY[ix] @ C)
    t2 = _logdet_pd(C.T @ pieces.S_X_inv[ix] @ C)
    t3 = _logdet_pd(C.T @ C)
    return n * (t1 + t2 - 2.0 * t3) + pieces.trailing


def spe_objective(data: SpatialDataset, G1: np.ndarray, phi: CorrelationParams) -> float:
    """Objective value at an orthonormal p x u candidate basis.

    For u = 0 only the trailing log-determinant terms remain (the empty
    determinants are 1); for u = p the S_X terms cancel analytically but are
    evaluated as written.
    """
    G1 = np.asarray(G1, dtype=float).reshape(data.p, -1)
    pieces = _ObjectivePieces(data, phi)
    return _objective_orthonormal(pieces, G1, data.n)


def spe_objective_unconstrained(
    data: SpatialDataset, coord: CoordinateParam, phi: CorrelationParams
) -> float:
    """Objective value in the unconstrained [I_u; A] coordinates.

    Equals spe_objective(recover_basis(coord).Gamma1, phi) up to 1e-9; the
    -2n log|C'C| term removes the non-orthonormality of C_A.
    """
    if coord.p != data.p:
        raise DimensionError(f"coordinates are for p={coord.p}, data has p={data.p}")
    pieces = _ObjectivePieces(data, phi)
    return _objective_coordinates(pieces, coord.A, coord.row_order, data.n)


def recover_basis(coord: CoordinateParam) -> EnvelopeBasis:
    """Orthonormal basis spanning the coordinate matrix C_A, rows unpermuted."""
    u, p = coord.u, coord.p
    C = np.vstack([np.eye(u), coord.A])
    Q1, Q0 = qr_orth(C)
    inv = np.argsort(coord.row_order)
    return EnvelopeBasis(Gamma1=Q1[inv], Gamma0=Q0[inv])


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def _row_order_for(G: np.ndarray) -> np.ndarray:
    """Permutation putting the u most independent rows of G first.

    QR with column pivoting on G' ranks rows by how much new direction they
    contribute, which keeps the implied G11 well away from singular.
    """
    p, u = G.shape
    if u == 0 or u == p:
        return np.arange(p)
    _, _, piv = scipy_qr(G.T, pivoting=True)
    lead = piv[:u]
    rest = np.setdiff1d(np.arange(p), lead)
    return np.concatenate([lead, rest])


def _coordinates_for(G: np.ndarray) -> CoordinateParam:
    perm = _row_order_for(G)
    Gp = G[perm]
    u = G.shape[1]
    G11 = Gp[:u, :]
    A = np.linalg.solve(G11.T, Gp[u:, :].T).T
    return CoordinateParam(A=A, row_order=perm)


def _initial_bases(
    data: SpatialDataset, u: int, theta0: CorrelationParams, opts: OptimOptions
) -> list[np.ndarray]:
    """Deterministic multi-start bases: S_X eigenvectors, GLS coefficient
    directions (padded with eigenvectors when u > rank), one Haar draw."""
    cov = adjusted_covariances(data, theta0)
    evals, evecs = np.linalg.eigh(cov.S_X)
    order = np.argsort(evals)[::-1]
    eig_basis = evecs[:, order[:u]]

    starts = [eig_basis]
    if opts.multistart >= 2:
        beta = np.linalg.solve(cov.S_X, cov.S_XY)
        U, _, _ = np.linalg.svd(beta, full_matrices=False)
        # Lead with the coefficient directions, pad with eigenvectors when
        # u exceeds the coefficient rank; QR keeps the first u independent
        # directions of the stack, in order.
        stacked = np.column_stack([U, evecs[:, order]])
        Q = np.linalg.qr(stacked, mode="reduced")[0]
        starts.append(Q[:, :u])
    if opts.multistart >= 3:
        rng = np.random.default_rng(opts.seed)
        starts.append(haar_orthobasis(data.p, u, rng))
    return starts


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def _quasi_newton(fun, x0: np.ndarray, opts: OptimOptions):
    """BFGS with central-difference gradients; simplex fallback on failure."""
    dim = x0.size
    maxiter = max(60, opts.budget // (2 * dim + 2))
    res = minimize(fun, x0, method="BFGS", jac="3-point", options={"gtol": 1e-6, "maxiter": maxiter})
    if not res.success or not np.isfinite(res.fun):
        nm = minimize(
            fun,
            res.x if np.all(np.isfinite(res.x)) else x0,
            method="Nelder-Mead",
            options={"maxfev": opts.budget, "fatol": opts.tol, "xatol": 1e-8},
        )
        if nm.fun <= res.fun or not np.isfinite(res.fun):
            return nm
    return res


def _finalize_fit(
    data: SpatialDataset,
    basis: EnvelopeBasis,
    theta: CorrelationParams,
    objective: float,
    spatial: bool,
) -> SpeFit:
    n, p, r, u = data.n, data.p, data.r, basis.u
    factor = build_correlation(data.sites, theta)
    cov = adjusted_covariances(data, theta, factor=factor)
    G1, G0 = basis.Gamma1, basis.Gamma0

    if u > 0:
        mu_YgX, beta_gls = gls_coefficients(data, theta, factor=factor)
        eta = G1.T @ beta_gls
        beta = G1 @ eta
    else:
        eta = np.zeros((0, r))
        beta = np.zeros((p, r))
        # With u = 0 the response is modeled as independent of X; the
        # conditional mean is the GLS mean of Y alone.
        ones = np.ones((n, 1))
        w1 = factor.whiten(ones)
        wy = factor.whiten(data.Y)
        mu_YgX = np.linalg.solve(w1.T @ w1, w1.T @ wy).ravel()

    Sigma_X_hat = cov.S_X / n
    Omega1 = G1.T @ Sigma_X_hat @ G1
    Omega0 = G0.T @ Sigma_X_hat @ G0
    Omega1 = 0.5 * (Omega1 + Omega1.T)
    Omega0 = 0.5 * (Omega0 + Omega0.T)
    if Omega0.shape[0] > 0:
        w = np.linalg.eigvalsh(Omega0)
        if w.min() < 1e-12 * max(np.trace(Omega0), 1e-300):
            warnings.warn(
                "Omega0 is near-singular; immaterial variation is almost degenerate",
                RuntimeWarning,
                stacklevel=2,
            )

    Sigma_Y_hat = cov.S_Y / n
    Sigma_YgX = Sigma_Y_hat - eta.T @ Omega1 @ eta
    Sigma_YgX = 0.5 * (Sigma_YgX + Sigma_YgX.T)

    ones = np.ones((n, 1))
    w1 = factor.whiten(ones)
    gram = float(w1[:, 0] @ w1[:, 0])
    mu_X = (w1.T @ factor.whiten(data.X)).ravel() / gram
    mu_Y = (w1.T @ factor.whiten(data.Y)).ravel() / gram

    k = p + r
    loglik = -0.5 * objective + 0.5 * n * k * (np.log(n) - LOG_2PI - 1.0)
    count = spe_param_count(p, r, u, spatial=spatial)
    return SpeFit(
        basis=basis,
        eta=eta,
        Omega1=Omega1,
        Omega0=Omega0,
        beta=beta,
        mu_YgX=np.atleast_1d(mu_YgX),
        mu_X=mu_X,
        mu_Y=mu_Y,
        Sigma_YgX=Sigma_YgX,
        theta=theta,
        u=u,
        loglik=loglik,
        aic=-2.0 * loglik + 2.0 * count,
        bic=-2.0 * loglik + count * np.log(n),
        param_count=count,
        n=n,
        objective=objective,
        spatial=spatial,
    )


def fit_spe(
    data: SpatialDataset,
    u: int,
    opts: OptimOptions | None = None,
    *,
    fix_theta: CorrelationParams | None = None,
    theta_init: CorrelationParams | None = None,
    _pieces_cache: dict | None = None,
) -> SpeFit:
    """Fit the spatial predictor envelope at dimension u.

    Parameters
    ----------
    data : SpatialDataset
    u : int
        Envelope dimension, 0 <= u <= p.  u = p reproduces the full GLS
        regression; u = 0 models Y and X as independent.
    opts : OptimOptions, optional
    fix_theta : CorrelationParams, optional
        Hold the correlation parameters fixed instead of estimating them.
        CorrelationParams(tau=1, lam=1) makes rho the identity, which is the
        independence-model predictor-envelope baseline.
    theta_init : CorrelationParams, optional
        Starting point for theta (defaults to the full-model MLE).

    Raises
    ------
    DimensionError, OptimFailure
    """
    if opts is None:
        opts = OptimOptions()
    p, r, n = data.p, data.r, data.n
    if not (0 <= u <= p):
        raise DimensionError(f"u must be in 0..{p}, got {u}")
    if n <= p + r + 1:
        raise RankDeficiency(f"need n > p + r + 1, got n={n}, p={p}, r={r}")

    spatial = fix_theta is None
    if spatial:
        if theta_init is None:
            theta_init = fit_full_model(data, opts).theta
        theta0 = theta_init
    else:
        theta0 = fix_theta

    cache: dict[bytes, _ObjectivePieces] = (
        _pieces_cache if _pieces_cache is not None else {}
    )

    def pieces_at(phi: CorrelationParams, key: bytes) -> _ObjectivePieces:
        entry = cache.get(key)
        if entry is None:
            entry = _ObjectivePieces(data, phi)
            cache[key] = entry
        return entry

    # Degenerate dimensions: no basis parameters, profile theta only.
    if u == 0 or u == p:
        perm = np.arange(p)
        A_fixed = np.zeros((p - u, u))

        def value_at(phi: CorrelationParams, key: bytes) -> float:
            pieces = pieces_at(phi, key)
            if u == 0:
                return pieces.trailing
            return _objective_coordinates(pieces, A_fixed, perm, n)

        if spatial:

            def neg(x):
                if not np.all(np.isfinite(x)) or abs(x[0]) > 60 or abs(x[1]) > 60:
                    return _PENALTY
                try:
                    return value_at(_from_unconstrained(x), x.tobytes())
                except Exception:
                    return _PENALTY

            res = _simplex_with_restart(
                neg, _to_unconstrained(theta0), opts.theta_budget, opts.tol
            )
            if not np.isfinite(res.fun) or res.fun >= _PENALTY:
                raise OptimFailure(f"no finite optimum at u={u}")
            theta_hat = _from_unconstrained(res.x)
            best_obj = float(res.fun)
        else:
            theta_hat = fix_theta
            best_obj = value_at(theta_hat, b"fixed")

        basis = EnvelopeBasis(Gamma1=np.eye(p)[:, :u], Gamma0=np.eye(p)[:, u:])
        return _finalize_fit(data, basis, theta_hat, best_obj, spatial)

    # General case: joint search over (theta, A) from each start.
    starts = _initial_bases(data, u, theta0, opts)
    x_theta0 = _to_unconstrained(theta0)
    best = None

    for G in starts:
        coord0 = _coordinates_for(G)
        perm = coord0.row_order

        if spatial:

            def neg(x, perm=perm):
                if not np.all(np.isfinite(x)) or abs(x[0]) > 60 or abs(x[1]) > 60:
                    return _PENALTY
                try:
                    pieces = pieces_at(_from_unconstrained(x[:2]), x[:2].tobytes())
                    A = x[2:].reshape(p - u, u)
                    return _objective_coordinates(pieces, A, perm, n)
                except Exception:
                    return _PENALTY

            x0 = np.concatenate([x_theta0, coord0.A.ravel()])
        else:

            def neg(x, perm=perm):
                if not np.all(np.isfinite(x)):
                    return _PENALTY
                try:
                    pieces = pieces_at(fix_theta, b"fixed")
                    return _objective_coordinates(pieces, x.reshape(p - u, u), perm, n)
                except Exception:
                    return _PENALTY

            x0 = coord0.A.ravel()

        res = _quasi_newton(neg, x0, opts)
        if best is None or res.fun < best[0]:
            best = (float(res.fun), res.x.copy(), perm)

    if best is None or not np.isfinite(best[0]) or best[0] >= _PENALTY:
        raise OptimFailure(f"envelope optimization found no finite optimum at u={u}")

    obj_val, x_best, perm = best
    if spatial:
        theta_hat = _from_unconstrained(x_best[:2])
        A_hat = x_best[2:].reshape(p - u, u)
    else:
        theta_hat = fix_theta
        A_hat = x_best.reshape(p - u, u)
    basis = recover_basis(CoordinateParam(A=A_hat, row_order=perm))
    return _finalize_fit(data, basis, theta_hat, obj_val, spatial)


def select_dimension(
    data: SpatialDataset,
    criterion: str = "bic",
    opts: OptimOptions | None = None,
    *,
    cv_k: int = 10,
    cv_reps: int = 1,
    fix_theta: CorrelationParams | None = None,
) -> DimensionSelection:
    """Fit u = 0..p and pick the dimension minimizing the criterion.

    criterion is "aic", "bic" or "cv"; "cv" scores each u by the mean
    k-fold kriging MSPE from the prediction module.  Per-u failures are
    recorded and that u skipped; only an all-fail run raises.
    """
    if opts is None:
        opts = OptimOptions()
    crit = criterion.lower()
    if crit not in {"aic", "bic", "cv"}:
        raise DimensionError(f"unknown criterion {criterion!r}")

    theta_init = None
    if fix_theta is None:
        theta_init = fit_full_model(data, opts).theta
    shared_cache: dict = {}

    def fit_one(u):
        try:
            return u, fit_spe(
                data,
                u,
                opts,
                fix_theta=fix_theta,
                theta_init=theta_init,
                _pieces_cache=shared_cache,
            ), None
        except Exception as exc:
            return u, None, f"{type(exc).__name__}: {exc}"

    dims = list(range(data.p + 1))
    if opts.n_jobs != 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=opts.n_jobs)(delayed(fit_one)(u) for u in dims)
    else:
        results = [fit_one(u) for u in dims]

    fits, failures, scores = {}, {}, {}
    for u, fit, err in results:
        if fit is None:
            failures[u] = err
            continue
        fits[u] = fit
        if crit == "aic":
            scores[u] = fit.aic
        elif crit == "bic":
            scores[u] = fit.bic

    if crit == "cv":
        from .prediction import cross_validate

        for u in list(fits):
            try:
                report = cross_validate(
                    data,
                    k=cv_k,
                    reps=cv_reps,
                    seed=opts.seed,
                    models={"spe": u},
                    opts=opts,
                )
                scores[u] = report.mean_mspe["spe"]
            except Exception as exc:
                failures[u] = f"{type(exc).__name__}: {exc}"
                del fits[u]

    if not fits:
        raise OptimFailure(f"every dimension failed: {failures}")
    u_hat = min(scores, key=lambda u: (scores[u], u))
    return DimensionSelection(
        u_hat=u_hat, fits=fits, scores=scores, criterion=crit, failures=failures
    )
