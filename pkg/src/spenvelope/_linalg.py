"""Small shared linear-algebra helpers."""

from __future__ import annotations

import numpy as np


def qr_orth(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Complete QR of a tall full-rank matrix with sign-fixed leading block.

    Returns (Q1, Q0): Q1 spans the columns of M with diag(R) >= 0 so the
    result is deterministic, Q0 completes the orthonormal frame.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    p, u = M.shape
    Q, R = np.linalg.qr(M, mode="complete")
    signs = np.sign(np.diag(R)[:u])
    signs[signs == 0] = 1.0
    Q1 = Q[:, :u] * signs[None, :]
    return Q1, Q[:, u:]


def haar_orthobasis(p: int, u: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed p x u orthonormal matrix (QR with sign-corrected R)."""
    Q1, _ = qr_orth(rng.standard_normal((p, u)))
    return Q1
