"""Regression-kriging prediction and cross-validated model comparison.

Holds out a quarter of the sites, predicts them from an envelope fit and
from the full GLS fit, then runs repeated 5-fold cross-validation to
compare the two models' mean squared prediction error.
"""
import numpy as np

from spenvelope import (
    ModelSpec,
    OptimOptions,
    PredictionRequest,
    SiteSet,
    cross_validate,
    fit_full_model,
    fit_spe,
    krige_predict,
    mspe,
)
from demos_common import make_envelope_data

data, truth = make_envelope_data(n=120, p=6, u=2, seed=31)
opts = OptimOptions(multistart=2)

# hold out 30 sites
rng = np.random.default_rng(0)
test_idx = rng.choice(data.n, size=30, replace=False)
train_idx = np.setdiff1d(np.arange(data.n), test_idx)
train, test = data.subset(train_idx), data.subset(test_idx)
req = PredictionRequest(train=train, test_sites=test.sites, test_X=test.X)

spe = fit_spe(train, 2, opts)
gls = fit_full_model(train, opts)
print("hold-out MSPE, envelope: %.4f" % mspe(krige_predict(spe, req), test.Y))
print("hold-out MSPE, full GLS: %.4f" % mspe(krige_predict(gls, req), test.Y))

# trend-only prediction for contrast: zero out the residual kriging term by
# predicting from infinitely far away
far = PredictionRequest(
    train=train,
    test_sites=SiteSet(test.sites.coords + 100.0),
    test_X=test.X,
)
print("trend-only MSPE, envelope: %.4f" % mspe(krige_predict(spe, far), test.Y))

# repeated k-fold comparison
report = cross_validate(
    data,
    k=5,
    reps=3,
    seed=7,
    models={"spe": ModelSpec("spe", u=2), "gls": ModelSpec("gls")},
    opts=OptimOptions(multistart=1),
)
print("\n5-fold CV over 3 repetitions")
for label, value in sorted(report.mean_mspe.items()):
    print("  %s mean MSPE: %.4f" % (label, value))
print("  response variance: %.4f" % report.response_variance)
