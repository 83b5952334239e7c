"""Asymptotic variances of the envelope estimates under known correlation.

Whitening by rho^{-1/2} turns the n spatial observations into n independent
draws, so the Fisher information of the estimable parameter vector

    h = (vech Sigma_Y|X, vech Sigma_X, vec beta)

is the familiar block-diagonal multivariate-normal information.  The
envelope structural parameters

    psi = (vech Sigma_Y|X, vec eta, vec Gamma1, vech Omega1, vech Omega0)

over-parameterize h (any right-rotation of Gamma1 gives the same model), so
the asymptotic variance of h(psi-hat) uses the Moore-Penrose form

    J_SPE^{-1} = H (H' J_F H)^+ H',    H = d h / d psi,

evaluated here with H obtained by central finite differences of an explicit
smooth reconstruction map.  The beta block has the closed form

    avar[sqrt(n) vec(beta-hat)] = Sigma_Y|X (x) Gamma1 Omega1^{-1} Gamma1'
                                  + (eta' (x) Gamma0) M^{-1} (eta (x) Gamma0')

with M = eta Sigma_Y|X^{-1} eta' (x) Omega0 + Omega1 (x) Omega0^{-1}
       + Omega1^{-1} (x) Omega0 - 2 I, which is the primary path; the
finite-difference route exists to cross-check it and to report variances
for the covariance parameters as well.

All variances are per observation (the sqrt(n) convention); divide by n for
standard errors of a fit.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, SingularInformation
from .envelope import SpeFit

__all__ = [
    "duplication_matrix",
    "elimination_matrix",
    "vech",
    "unvech",
    "fisher_full",
    "avar_beta",
    "avar_beta_components",
    "avar_all",
    "z_scores",
]

_FD_BASE_STEP = 1e-6
_PINV_CUTOFF = 1e-10


def duplication_matrix(p: int) -> np.ndarray:
    """0/1 matrix E_p with E_p vech(M) = vec(M) for symmetric p x p M."""
    if p < 1:
        raise DimensionError("p must be >= 1")
    m = p * (p + 1) // 2
    E = np.zeros((p * p, m))
    col = 0
    for j in range(p):
        for i in range(j, p):
            E[j * p + i, col] = 1.0
            E[i * p + j, col] = 1.0
            col += 1
    return E


def elimination_matrix(p: int) -> np.ndarray:
    """0/1 matrix C_p with C_p vec(M) = vech(M); satisfies C_p E_p = I."""
    if p < 1:
        raise DimensionError("p must be >= 1")
    m = p * (p + 1) // 2
    C = np.zeros((m, p * p))
    row = 0
    for j in range(p):
        for i in range(j, p):
            C[row, j * p + i] = 1.0
            row += 1
    return C


def vech(M: np.ndarray) -> np.ndarray:
    """Column-stacked lower triangle (including the diagonal)."""
    M = np.asarray(M)
    p = M.shape[0]
    return np.concatenate([M[j:, j] for j in range(p)]) if p else np.zeros(0)


def unvech(v: np.ndarray, p: int) -> np.ndarray:
    M = np.zeros((p, p))
    idx = 0
    for j in range(p):
        k = p - j
        M[j:, j] = v[idx : idx + k]
        M[j, j:] = v[idx : idx + k]
        idx += k
    return M


def fisher_full(Sigma_X: np.ndarray, Sigma_YgX: np.ndarray) -> np.ndarray:
    """Per-observation Fisher information of (vech Sigma_Y|X, vech Sigma_X, vec beta).

    Block diagonal:

        J_Sigma_Y|X = (1/2) E_r' (Sigma_Y|X^{-1} (x) Sigma_Y|X^{-1}) E_r
        J_Sigma_X   = (1/2) E_p' (Sigma_X^{-1}   (x) Sigma_X^{-1})  E_p
        J_beta      = Sigma_Y|X^{-1} (x) Sigma_X
    """
    Sigma_X = np.atleast_2d(np.asarray(Sigma_X, dtype=float))
    Sigma_YgX = np.atleast_2d(np.asarray(Sigma_YgX, dtype=float))
    p = Sigma_X.shape[0]
    r = Sigma_YgX.shape[0]
    try:
        Sx_inv = np.linalg.inv(Sigma_X)
        Sy_inv = np.linalg.inv(Sigma_YgX)
    except np.linalg.LinAlgError as exc:
        raise SingularInformation("Sigma_X or Sigma_Y|X is singular") from exc
    E_r = duplication_matrix(r)
    E_p = duplication_matrix(p)
    J_y = 0.5 * E_r.T @ np.kron(Sy_inv, Sy_inv) @ E_r
    J_x = 0.5 * E_p.T @ np.kron(Sx_inv, Sx_inv) @ E_p
    J_b = np.kron(Sy_inv, Sigma_X)
    out = np.zeros((J_y.shape[0] + J_x.shape[0] + J_b.shape[0],) * 2)
    a = J_y.shape[0]
    b = a + J_x.shape[0]
    out[:a, :a] = J_y
    out[a:b, a:b] = J_x
    out[b:, b:] = J_b
    return out


def avar_beta(fit: SpeFit) -> np.ndarray:
    """Closed-form asymptotic variance of sqrt(n) vec(beta-hat), pr x pr.

    Requires u >= 1 (at u = 0 the coefficient estimate is identically zero).
    At u = p the second term vanishes and the result is the full-model
    variance Sigma_Y|X (x) Sigma_X^{-1}.
    """
    if fit.u < 1:
        raise DimensionError("avar_beta needs u >= 1")
    return avar_beta_components(
        fit.basis.Gamma1, fit.basis.Gamma0, fit.eta, fit.Omega1, fit.Omega0, fit.Sigma_YgX
    )


def avar_beta_components(
    Gamma1: np.ndarray,
    Gamma0: np.ndarray,
    eta: np.ndarray,
    Omega1: np.ndarray,
    Omega0: np.ndarray,
    Sigma_YgX: np.ndarray,
) -> np.ndarray:
    """avar_beta evaluated at explicit parameter values (e.g. the truth)."""
    G1 = np.atleast_2d(np.asarray(Gamma1, dtype=float))
    G0 = np.atleast_2d(np.asarray(Gamma0, dtype=float))
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    Omega1 = np.atleast_2d(np.asarray(Omega1, dtype=float))
    Omega0 = np.atleast_2d(np.asarray(Omega0, dtype=float))
    Sigma_YgX = np.atleast_2d(np.asarray(Sigma_YgX, dtype=float))
    p, u = G1.shape
    if u < 1:
        raise DimensionError("avar_beta needs u >= 1")

    try:
        Om1_inv = np.linalg.inv(Omega1)
        term1 = np.kron(Sigma_YgX, G1 @ Om1_inv @ G1.T)
    except np.linalg.LinAlgError as exc:
        raise SingularInformation("Omega1 is singular") from exc
    if u == p:
        return term1

    try:
        Om0_inv = np.linalg.inv(Omega0)
        Sy_inv = np.linalg.inv(Sigma_YgX)
    except np.linalg.LinAlgError as exc:
        raise SingularInformation("Omega0 or Sigma_Y|X is singular") from exc
    M = (
        np.kron(eta @ Sy_inv @ eta.T, Omega0)
        + np.kron(Omega1, Om0_inv)
        + np.kron(Om1_inv, Omega0)
        - 2.0 * np.eye(u * (p - u))
    )
    try:
        Minv = np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise SingularInformation("M matrix is singular") from exc
    term2 = np.kron(eta.T, G0) @ Minv @ np.kron(eta, G0.T)
    out = term1 + term2
    return 0.5 * (out + out.T)


# ---------------------------------------------------------------------------
# Numerical-gradient route
# ---------------------------------------------------------------------------


def _pack_psi(fit: SpeFit) -> np.ndarray:
    return np.concatenate(
        [
            vech(fit.Sigma_YgX),
            fit.eta.ravel(order="F"),
            fit.basis.Gamma1.ravel(order="F"),
            vech(fit.Omega1),
            vech(fit.Omega0),
        ]
    )


def _h_of_psi(psi: np.ndarray, p: int, r: int, u: int, Gamma0_base: np.ndarray) -> np.ndarray:
    """Smooth reconstruction (vech Sigma_Y|X, vech Sigma_X, vec beta) from psi.

    Gamma1 perturbations need not stay orthonormal; the complement is rebuilt
    by projecting the base-point Gamma0 off span(Gamma1) and re-orthogonalizing
    with a polar factor, which is smooth and equals Gamma0_base at the base
    point.  The implied tangent directions span the envelope model's tangent
    space, which is all the Moore-Penrose form consumes.
    """
    idx = 0
    ry = r * (r + 1) // 2
    Sigma_YgX = unvech(psi[idx : idx + ry], r)
    idx += ry
    eta = psi[idx : idx + u * r].reshape(u, r, order="F")
    idx += u * r
    G1 = psi[idx : idx + p * u].reshape(p, u, order="F")
    idx += p * u
    o1 = u * (u + 1) // 2
    Omega1 = unvech(psi[idx : idx + o1], u)
    idx += o1
    o0 = (p - u) * (p - u + 1) // 2
    Omega0 = unvech(psi[idx : idx + o0], p - u)

    if u < p:
        P = G1 @ np.linalg.solve(G1.T @ G1, G1.T)
        W = Gamma0_base - P @ Gamma0_base
        # polar orthonormalization: W (W'W)^{-1/2}
        evals, evecs = np.linalg.eigh(W.T @ W)
        G0 = W @ evecs @ np.diag(evals**-0.5) @ evecs.T
        Sigma_X = G1 @ Omega1 @ G1.T + G0 @ Omega0 @ G0.T
    else:
        Sigma_X = G1 @ Omega1 @ G1.T
    beta = G1 @ eta
    return np.concatenate([vech(Sigma_YgX), vech(Sigma_X), beta.ravel(order="F")])


def avar_all(fit: SpeFit) -> np.ndarray:
    """Moore-Penrose asymptotic variance of the full estimable vector h.

    H is computed by central differences with step 1e-6 (1 + |psi_i|);
    singular values of H' J_F H below 1e-10 of the largest are inverted to
    zero.  The beta block agrees with avar_beta to about 1e-6 relative.
    """
    p, r, u = fit.basis.p, fit.Sigma_YgX.shape[0], fit.u
    Sigma_X = fit.basis.Gamma1 @ fit.Omega1 @ fit.basis.Gamma1.T
    if u < p:
        Sigma_X = Sigma_X + fit.basis.Gamma0 @ fit.Omega0 @ fit.basis.Gamma0.T
    J_F = fisher_full(Sigma_X, fit.Sigma_YgX)

    psi0 = _pack_psi(fit)
    G0_base = fit.basis.Gamma0
    h0 = _h_of_psi(psi0, p, r, u, G0_base)
    H = np.zeros((h0.size, psi0.size))
    for i in range(psi0.size):
        step = _FD_BASE_STEP * (1.0 + abs(psi0[i]))
        plus = psi0.copy()
        minus = psi0.copy()
        plus[i] += step
        minus[i] -= step
        H[:, i] = (
            _h_of_psi(plus, p, r, u, G0_base) - _h_of_psi(minus, p, r, u, G0_base)
        ) / (2.0 * step)

    inner = H.T @ J_F @ H
    inner_pinv = np.linalg.pinv(0.5 * (inner + inner.T), rcond=_PINV_CUTOFF)
    out = H @ inner_pinv @ H.T
    return 0.5 * (out + out.T)


def z_scores(fit: SpeFit, n: int | None = None) -> np.ndarray:
    """Elementwise beta / sqrt(avar_beta_diag / n), shaped p x r."""
    if n is None:
        n = fit.n
    av = avar_beta(fit)
    p, r = fit.beta.shape
    se = np.sqrt(np.diag(av) / n).reshape(p, r, order="F")
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, fit.beta / se, 0.0)
    return z
