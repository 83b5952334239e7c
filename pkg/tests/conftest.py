"""Shared builders for envelope-structured test data."""

import numpy as np
import pytest

from spenvelope._linalg import haar_orthobasis
from spenvelope.spatial import (
    CorrelationParams,
    JointModelParams,
    SiteSet,
    SpatialDataset,
    sample_joint_gp,
)


def envelope_model(p, u, r, rng, omega1=None, omega0=None, eta=None, sigma_ygx=None):
    """Random envelope-structured joint model; returns a dict of the truth."""
    frame = haar_orthobasis(p, p, rng)
    Gamma1, Gamma0 = frame[:, :u], frame[:, u:]
    if omega1 is None:
        omega1 = np.exp(-np.arange(1, u + 1) ** (2.0 / 3.0))
    if omega0 is None:
        omega0 = np.exp(-np.arange(u + 1, p + 1) ** (2.0 / 3.0))
    if eta is None:
        eta = np.ones((u, r))
    if sigma_ygx is None:
        sigma_ygx = 0.05 * np.eye(r)
    Omega1 = np.diag(np.atleast_1d(omega1))
    Omega0 = np.diag(np.atleast_1d(omega0)) if p > u else np.zeros((0, 0))
    Sigma_X = Gamma1 @ Omega1 @ Gamma1.T
    if p > u:
        Sigma_X = Sigma_X + Gamma0 @ Omega0 @ Gamma0.T
    Sigma_XY = Gamma1 @ Omega1 @ eta
    Sigma_Y = sigma_ygx + eta.T @ Omega1 @ eta
    Sigma_Z = np.block([[Sigma_Y, Sigma_XY.T], [Sigma_XY, Sigma_X]])
    return {
        "Gamma1": Gamma1,
        "Gamma0": Gamma0,
        "Omega1": Omega1,
        "Omega0": Omega0,
        "eta": eta,
        "Sigma_YgX": sigma_ygx,
        "Sigma_X": Sigma_X,
        "beta": Gamma1 @ eta,
        "params": JointModelParams(mu_Z=np.zeros(p + r), Sigma_Z=Sigma_Z, r=r),
    }


def envelope_dataset(n, p, u, r, seed, theta=None, **kwargs):
    """Sample a dataset from a random envelope model; returns (data, truth)."""
    rng = np.random.default_rng(seed)
    truth = envelope_model(p, u, r, rng, **kwargs)
    if theta is None:
        theta = CorrelationParams(tau=0.1, lam=0.3)
    sites = SiteSet(rng.uniform(0.0, 1.0, (n, 2)))
    data = sample_joint_gp(sites, theta, truth["params"], seed=rng)
    truth["theta"] = theta
    return data, truth


def plain_dataset(n, p, r, seed, theta=None):
    """Unstructured joint-normal dataset (no envelope constraint)."""
    rng = np.random.default_rng(seed)
    if theta is None:
        theta = CorrelationParams(tau=0.2, lam=0.4)
    M = rng.standard_normal((p + r, p + r))
    Sigma_Z = M @ M.T / (p + r) + 0.5 * np.eye(p + r)
    params = JointModelParams(mu_Z=rng.standard_normal(p + r), Sigma_Z=Sigma_Z, r=r)
    sites = SiteSet(rng.uniform(0.0, 1.0, (n, 2)))
    return sample_joint_gp(sites, theta, params, seed=rng)


@pytest.fixture(scope="session")
def small_data():
    """A fixed small dataset reused by cheap identity checks."""
    return plain_dataset(n=9, p=3, r=2, seed=42)
