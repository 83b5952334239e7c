"""Regression-kriging prediction and repeated k-fold cross-validation.

Predictions at held-out sites combine the fitted regression surface with the
conditional expectation of the spatially correlated residual field:

    Y_hat = 1 mu' + X_test beta + R_ts R_tt^{-1} (Y_train - 1 mu' - X_train beta),

where R_tt is the training-site correlation matrix at theta-hat and R_ts the
test-by-train cross-correlation.  Separability makes this valid column by
column for a multivariate response.  The intercept rides along in both the
trend and the residual, the standard regression-kriging arrangement.

Cross-validation shuffles sites uniformly (no spatial blocking), refits every
model on each training fold, and scores pooled mean squared prediction error
per repetition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .envelope import fit_spe, select_dimension
from .errors import DimensionError, SpenvelopeError
from .gls import OptimOptions, fit_full_model
from .spatial import (
    CorrelationParams,
    SiteSet,
    SpatialDataset,
    build_correlation,
    cross_correlation,
)

__all__ = [
    "PredictionRequest",
    "ModelSpec",
    "CvReport",
    "krige_predict",
    "mspe",
    "cross_validate",
    "IDENTITY_CORRELATION",
]

# tau = 1 zeroes every off-diagonal correlation, giving rho = I exactly; this
# is the independence-model (non-spatial) baseline.
IDENTITY_CORRELATION = CorrelationParams(tau=1.0, lam=1.0)


@dataclass(frozen=True)
class PredictionRequest:
    """Training data plus the sites and predictor values to predict at."""

    train: SpatialDataset
    test_sites: SiteSet
    test_X: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.test_X, dtype=float))
        if X.shape[0] != self.test_sites.n:
            raise DimensionError("test_X rows must match number of test sites")
        if X.shape[1] != self.train.p:
            raise DimensionError(
                f"test_X has {X.shape[1]} columns, training data has p={self.train.p}"
            )
        object.__setattr__(self, "test_X", X)


@dataclass(frozen=True)
class ModelSpec:
    """One model entry for cross-validation.

    kind is "spe", "pe" (envelope with rho forced to identity) or "gls".
    For the envelope kinds either fix u or set select to "aic"/"bic" to
    re-select the dimension on every training fold.
    """

    kind: str
    u: int | None = None
    select: str | None = None

    def __post_init__(self):
        if self.kind not in {"spe", "pe", "gls"}:
            raise DimensionError(f"unknown model kind {self.kind!r}")
        if self.kind != "gls" and self.u is None and self.select is None:
            raise DimensionError("envelope models need a fixed u or a selection criterion")


@dataclass(frozen=True)
class CvReport:
    """Repeated k-fold cross-validation summary."""

    mean_mspe: dict
    per_rep: dict
    fold_rows: list
    k: int
    reps: int
    seed: int
    response_variance: float


def krige_predict(fit, req: PredictionRequest) -> np.ndarray:
    """Conditional-mean prediction at the requested sites, m x r.

    fit is any fitted model exposing mu_YgX, beta and theta (SpeFit or
    GlsFit).  A test site coinciding with a training site reproduces the
    training response exactly when tau = 0; with a nugget the prediction
    shrinks toward the regression surface.
    """
    mu = np.atleast_1d(np.asarray(fit.mu_YgX, dtype=float))
    beta = np.atleast_2d(np.asarray(fit.beta, dtype=float))
    train = req.train
    factor = build_correlation(train.sites, fit.theta)
    resid = train.Y - mu[None, :] - train.X @ beta
    R_ts = cross_correlation(req.test_sites, train.sites, fit.theta)
    return mu[None, :] + req.test_X @ beta + R_ts @ factor.solve(resid)


def mspe(pred: np.ndarray, actual: np.ndarray) -> float:
    """Mean squared prediction error (1/N) sum (y_hat - y)^2, N = m * r."""
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    actual = np.atleast_2d(np.asarray(actual, dtype=float))
    if pred.shape != actual.shape:
        raise DimensionError(f"shape mismatch: {pred.shape} vs {actual.shape}")
    return float(np.mean((pred - actual) ** 2))


def _fit_model(train: SpatialDataset, spec: ModelSpec, opts: OptimOptions):
    if spec.kind == "gls":
        return fit_full_model(train, opts)
    fix = IDENTITY_CORRELATION if spec.kind == "pe" else None
    if spec.select is not None:
        sel = select_dimension(train, spec.select, opts, fix_theta=fix)
        return sel.fits[sel.u_hat]
    return fit_spe(train, spec.u, opts, fix_theta=fix)


def cross_validate(
    data: SpatialDataset,
    k: int,
    reps: int,
    seed: int,
    models: dict[str, ModelSpec | str | int],
    opts: OptimOptions | None = None,
) -> CvReport:
    """Repeated k-fold cross-validation of kriging predictions.

    models maps a label to a ModelSpec ("gls" and a plain integer u are
    accepted as shorthand).  Every repetition reshuffles, splits into k
    near-equal folds (sizes differ by at most one), refits each model on the
    training part of every fold and accumulates squared prediction errors;
    the per-repetition MSPE pools all n predictions.  Deterministic given
    seed.  A fold failure propagates with the repetition and fold attached.
    """
    if opts is None:
        opts = OptimOptions()
    if not (2 <= k <= data.n):
        raise DimensionError(f"need 2 <= k <= n, got k={k}, n={data.n}")
    specs = {}
    for label, spec in models.items():
        if isinstance(spec, ModelSpec):
            specs[label] = spec
        elif spec == "gls":
            specs[label] = ModelSpec("gls")
        elif isinstance(spec, int):
            specs[label] = ModelSpec("spe", u=spec)
        else:
            raise DimensionError(f"bad model spec for {label!r}: {spec!r}")

    rng = np.random.default_rng(seed)
    per_rep = {label: [] for label in specs}
    fold_rows = []
    for rep in range(reps):
        order = rng.permutation(data.n)
        folds = np.array_split(order, k)
        sq_sums = {label: 0.0 for label in specs}
        count = 0
        for fold_idx, test_idx in enumerate(folds):
            train_idx = np.setdiff1d(order, test_idx)
            train = data.subset(train_idx)
            test = data.subset(test_idx)
            req = PredictionRequest(
                train=train, test_sites=test.sites, test_X=test.X
            )
            for label, spec in specs.items():
                try:
                    fit = _fit_model(train, spec, opts)
                    pred = krige_predict(fit, req)
                except Exception as exc:
                    raise SpenvelopeError(
                        f"model {label!r} failed on repetition {rep}, fold {fold_idx}: {exc}"
                    ) from exc
                fold_mspe = mspe(pred, test.Y)
                sq_sums[label] += float(np.sum((pred - test.Y) ** 2))
                fold_rows.append((label, rep, fold_idx, fold_mspe))
            count += test_idx.size * data.r
        for label in specs:
            per_rep[label].append(sq_sums[label] / count)

    ybar = data.Y.mean(axis=0)
    resp_var = float(np.mean(np.sum((data.Y - ybar) ** 2, axis=1)))
    return CvReport(
        mean_mspe={label: float(np.mean(v)) for label, v in per_rep.items()},
        per_rep={label: list(map(float, v)) for label, v in per_rep.items()},
        fold_rows=fold_rows,
        k=k,
        reps=reps,
        seed=seed,
        response_variance=resp_var,
    )
