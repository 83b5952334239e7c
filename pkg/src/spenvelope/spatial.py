"""Spatial building blocks: sites, correlation kernel, and GP sampling.

The separable model used throughout the package couples one correlation
function over space with one covariance among variables, so that the n
observations of a k-variate field Z stack into an n x k matrix with

    Var[vec(Z)] = Sigma_Z (x) rho(theta),

where rho(theta) is the n x n matrix of pairwise site correlations and (x)
is the Kronecker product.  The correlation kernel is exponential with a
white-noise (nugget) proportion tau:

    rho(s, s') = tau * 1{s = s'} + (1 - tau) * exp(-||s - s'|| / lambda).

Distances are Euclidean on raw planar coordinates.  The white-noise term is
attached to observations, not coordinates: two distinct observations at the
same location correlate at (1 - tau), which keeps rho(theta) nonsingular for
tau > 0 even when sites are duplicated.

Randomness comes from numpy's default PCG64 generator; every sampling
function takes an explicit seed so simulation output is reproducible bit for
bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from .errors import DimensionError, SingularCorrelation

__all__ = [
    "SiteSet",
    "CorrelationParams",
    "CorrelationFactor",
    "JointModelParams",
    "SpatialDataset",
    "correlation",
    "build_correlation",
    "cross_correlation",
    "sample_joint_gp",
]

# Added to the diagonal once before declaring the Cholesky a failure.
_CHOLESKY_JITTER = 1e-10


@dataclass(frozen=True)
class SiteSet:
    """n sites in the plane.

    Parameters
    ----------
    coords : ndarray, shape (n, 2)
        Planar coordinates, one row per site.  Duplicate rows are allowed
        (53 field samples at 14 locations is a real layout) but make the
        correlation matrix singular when the nugget is zero.
    """

    coords: np.ndarray

    def __post_init__(self):
        coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise DimensionError(f"coords must be (n, 2), got {coords.shape}")
        if coords.shape[0] < 1:
            raise DimensionError("need at least one site")
        if not np.all(np.isfinite(coords)):
            raise DimensionError("coordinates must be finite")
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @cached_property
    def _dists(self) -> np.ndarray:
        d = cdist(self.coords, self.coords)
        d.setflags(write=False)
        return d

    def distance_matrix(self) -> np.ndarray:
        return self._dists

    @cached_property
    def has_duplicates(self) -> bool:
        off = self.distance_matrix() + np.eye(self.n)
        return bool(np.any(off == 0.0))


@dataclass(frozen=True)
class CorrelationParams:
    """Exponential-plus-nugget kernel parameters.

    tau is the white-noise proportion in [0, 1]; lam > 0 is the range of the
    exponential decay.
    """

    tau: float
    lam: float

    def __post_init__(self):
        if not (0.0 <= self.tau <= 1.0):
            raise DimensionError(f"tau must lie in [0, 1], got {self.tau}")
        if not (self.lam > 0.0 and np.isfinite(self.lam)):
            raise DimensionError(f"lambda must be positive, got {self.lam}")


def correlation(s, t, theta: CorrelationParams) -> float:
    """Pointwise kernel value tau*1{s=t} + (1-tau)*exp(-||s-t||/lambda)."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    dist = float(np.linalg.norm(s - t))
    same = 1.0 if np.array_equal(s, t) else 0.0
    return theta.tau * same + (1.0 - theta.tau) * np.exp(-dist / theta.lam)


@dataclass(frozen=True)
class CorrelationFactor:
    """Correlation matrix rho(theta) with its lower Cholesky factor.

    Immutable after construction; safe to share across threads.  ``solve``
    and ``whiten`` reuse the factor, so repeated right-hand sides cost one
    triangular solve each.
    """

    rho: np.ndarray
    chol_lower: np.ndarray
    log_det: float

    @property
    def n(self) -> int:
        return self.rho.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Return rho^{-1} b."""
        return cho_solve((self.chol_lower, True), np.asarray(b, dtype=float))

    def whiten(self, b: np.ndarray) -> np.ndarray:
        """Return L^{-1} b, so that whiten(a).T @ whiten(b) = a' rho^{-1} b."""
        return solve_triangular(self.chol_lower, np.asarray(b, dtype=float), lower=True)


def build_correlation(sites: SiteSet, theta: CorrelationParams) -> CorrelationFactor:
    """Assemble and factor the n x n correlation matrix of a site set.

    The diagonal is exactly 1.  Off-diagonal entries are
    (1 - tau) * exp(-d_ij / lambda) even at zero distance, which is what
    makes duplicated sites workable for tau > 0.

    Raises
    ------
    SingularCorrelation
        If sites are duplicated with tau = 0, or the Cholesky factorization
        fails after one diagonal-jitter retry.
    """
    if theta.tau == 0.0 and sites.has_duplicates:
        raise SingularCorrelation("duplicate sites with tau = 0 make rho singular")
    d = sites.distance_matrix()
    rho = (1.0 - theta.tau) * np.exp(-d / theta.lam)
    np.fill_diagonal(rho, 1.0)
    try:
        lower = cholesky(rho, lower=True)
    except Exception:
        lower = None
    if lower is None:
        try:
            lower = cholesky(rho + _CHOLESKY_JITTER * np.eye(sites.n), lower=True)
        except Exception as exc:
            raise SingularCorrelation(
                f"correlation matrix not positive definite (tau={theta.tau}, lambda={theta.lam})"
            ) from exc
    log_det = 2.0 * float(np.sum(np.log(np.diag(lower))))
    return CorrelationFactor(rho=rho, chol_lower=lower, log_det=log_det)


def cross_correlation(sites_a: SiteSet, sites_b: SiteSet, theta: CorrelationParams) -> np.ndarray:
    """Correlation between two distinct observation sets.

    No nugget is carried across sets: entries are (1 - tau) * exp(-d/lambda)
    even where coordinates coincide, since the white-noise components of
    separate observations are independent.
    """
    d = cdist(sites_a.coords, sites_b.coords)
    return (1.0 - theta.tau) * np.exp(-d / theta.lam)


@dataclass(frozen=True)
class JointModelParams:
    """Mean and covariance of the joint (response, predictor) field.

    Sigma_Z is (r+p) x (r+p) with the response block leading:

        Sigma_Z = [[Sigma_Y,    Sigma_XY'],
                   [Sigma_XY,   Sigma_X ]].
    """

    mu_Z: np.ndarray
    Sigma_Z: np.ndarray
    r: int

    def __post_init__(self):
        mu = np.asarray(self.mu_Z, dtype=float).ravel()
        Sig = np.asarray(self.Sigma_Z, dtype=float)
        k = mu.shape[0]
        if Sig.shape != (k, k):
            raise DimensionError(f"Sigma_Z must be ({k}, {k}), got {Sig.shape}")
        if not (1 <= self.r < k):
            raise DimensionError(f"need 1 <= r < r+p, got r={self.r}, k={k}")
        if not np.allclose(Sig, Sig.T, atol=1e-12):
            raise DimensionError("Sigma_Z must be symmetric")
        object.__setattr__(self, "mu_Z", mu)
        object.__setattr__(self, "Sigma_Z", Sig)

    @property
    def p(self) -> int:
        return self.mu_Z.shape[0] - self.r

    @property
    def Sigma_Y(self) -> np.ndarray:
        return self.Sigma_Z[: self.r, : self.r]

    @property
    def Sigma_X(self) -> np.ndarray:
        return self.Sigma_Z[self.r :, self.r :]

    @property
    def Sigma_XY(self) -> np.ndarray:
        """p x r cross-covariance block."""
        return self.Sigma_Z[self.r :, : self.r]


@dataclass(frozen=True)
class SpatialDataset:
    """n co-located observations of an r-variate response and p-variate predictor."""

    sites: SiteSet
    Y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if Y.shape[0] != self.sites.n or X.shape[0] != self.sites.n:
            raise DimensionError(
                f"row counts must equal n={self.sites.n}, got Y {Y.shape}, X {X.shape}"
            )
        if Y.shape[1] < 1 or X.shape[1] < 1:
            raise DimensionError("need r >= 1 and p >= 1")
        if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(X))):
            raise DimensionError("Y and X entries must be finite")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.sites.n

    @property
    def r(self) -> int:
        return self.Y.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, idx: np.ndarray) -> "SpatialDataset":
        """Row subset (used by cross-validation folds)."""
        idx = np.asarray(idx)
        return SpatialDataset(
            sites=SiteSet(self.sites.coords[idx]), Y=self.Y[idx], X=self.X[idx]
        )


def sample_joint_gp(
    sites: SiteSet,
    theta: CorrelationParams,
    params: JointModelParams,
    seed: int,
) -> SpatialDataset:
    """Draw one realization of the separable joint GP at the given sites.

    Z = 1 mu_Z' + L_rho E L_Sigma', with E an n x (r+p) matrix of iid
    standard normals, so that Var[vec(Z)] = Sigma_Z (x) rho(theta).  The
    first r columns of Z are the response.  Deterministic given the seed.
    """
    factor = build_correlation(sites, theta)
    try:
        L_sigma = cholesky(params.Sigma_Z, lower=True)
    except Exception as exc:
        raise SingularCorrelation("Sigma_Z is not positive definite") from exc
    rng = np.random.default_rng(seed)
    k = params.mu_Z.shape[0]
    E = rng.standard_normal((sites.n, k))
    Z = params.mu_Z[None, :] + factor.chol_lower @ E @ L_sigma.T
    return SpatialDataset(sites=sites, Y=Z[:, : params.r], X=Z[:, params.r :])
