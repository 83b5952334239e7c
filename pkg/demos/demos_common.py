"""Shared generator for the demo scripts."""
import numpy as np

from spenvelope import CorrelationParams, JointModelParams, SiteSet, sample_joint_gp
from spenvelope._linalg import haar_orthobasis


def make_envelope_data(n, p, u, seed, r=1, lam=0.3, tau=0.1):
    """Envelope-structured dataset with dominant material variation."""
    rng = np.random.default_rng(seed)
    frame = haar_orthobasis(p, p, rng)
    Gamma1, Gamma0 = frame[:, :u], frame[:, u:]
    Omega1 = np.diag(np.exp(-np.arange(1, u + 1) ** (2.0 / 3.0)))
    Omega0 = np.diag(np.exp(-np.arange(u + 1, p + 1) ** (2.0 / 3.0)))
    eta = np.ones((u, r))
    Sigma_YgX = 0.05 * np.eye(r)
    Sigma_X = Gamma1 @ Omega1 @ Gamma1.T + Gamma0 @ Omega0 @ Gamma0.T
    Sigma_XY = Gamma1 @ Omega1 @ eta
    Sigma_Y = Sigma_YgX + eta.T @ Omega1 @ eta
    Sigma_Z = np.block([[Sigma_Y, Sigma_XY.T], [Sigma_XY, Sigma_X]])
    params = JointModelParams(mu_Z=np.zeros(p + r), Sigma_Z=Sigma_Z, r=r)
    sites = SiteSet(rng.uniform(0, 1, (n, 2)))
    theta = CorrelationParams(tau=tau, lam=lam)
    data = sample_joint_gp(sites, theta, params, seed=rng)
    truth = {"Gamma1": Gamma1, "beta": Gamma1 @ eta, "theta": theta}
    return data, truth
