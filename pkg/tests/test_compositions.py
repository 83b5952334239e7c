"""Compositional transforms and the synthetic survey fixture."""

import numpy as np
import pandas as pd
import pytest

from spenvelope.compositions import (
    CompositionTable,
    log_ratio_transform,
    make_synthetic_geochem,
    replace_below_threshold,
    response_transform,
    subcomposition_normalize,
)
from spenvelope.errors import MissingThreshold, NonpositiveComponent, OutOfRange
from spenvelope.gls import fit_full_model
from spenvelope.spatial import SiteSet, SpatialDataset


def small_table(values, thresholds=None, columns=None):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if columns is None:
        columns = [f"c{i}" for i in range(values.shape[1])]
    coords = np.linspace(0, 1, 2 * len(values)).reshape(-1, 2)
    return CompositionTable(
        components=pd.DataFrame(values, columns=columns),
        coords=coords,
        thresholds=thresholds,
    )


class TestThresholdReplacement:
    def test_below_becomes_half_threshold(self):
        table = small_table([[0.0, 1.0]], thresholds={"c0": 0.02})
        out, count = replace_below_threshold(table)
        assert out.components.loc[0, "c0"] == pytest.approx(0.01)
        assert count == 1

    def test_above_unchanged(self):
        table = small_table([[0.05, 1.0]], thresholds={"c0": 0.02})
        out, count = replace_below_threshold(table)
        assert out.components.loc[0, "c0"] == 0.05
        assert count == 0

    def test_all_above_count_zero(self):
        table = small_table([[0.5, 1.0], [0.4, 2.0]], thresholds={"c0": 0.02, "c1": 0.1})
        out, count = replace_below_threshold(table)
        assert count == 0
        assert out.components.equals(table.components)

    def test_missing_threshold(self):
        table = small_table([[0.5, 1.0]], thresholds={"c0": 0.02})
        with pytest.raises(MissingThreshold):
            replace_below_threshold(table, columns=["c1"])
        with pytest.raises(MissingThreshold):
            replace_below_threshold(small_table([[0.5, 1.0]]))


class TestSubcomposition:
    def test_proportions(self):
        table = small_table([[2.0, 3.0, 5.0]])
        out = subcomposition_normalize(table, ["c0", "c1", "c2"])
        assert np.allclose(out.components.to_numpy(), [[0.2, 0.3, 0.5]])

    def test_single_column(self):
        table = small_table([[4.0, 9.0], [2.5, 1.0]])
        out = subcomposition_normalize(table, ["c0"])
        assert np.allclose(out.components["c0"], 1.0)
        assert np.allclose(out.components["c1"], table.components["c1"])

    def test_row_sums_one(self):
        rng = np.random.default_rng(0)
        table = small_table(rng.uniform(0.1, 5.0, (6, 4)))
        out = subcomposition_normalize(table, ["c0", "c1", "c2", "c3"])
        assert np.abs(out.components.sum(axis=1) - 1.0).max() < 1e-12

    def test_nonpositive_rejected(self):
        with pytest.raises(NonpositiveComponent):
            subcomposition_normalize(small_table([[0.0, 1.0]]), ["c0", "c1"])


class TestLogRatio:
    def test_explicit_values(self):
        table = small_table([[0.2, 0.3, 0.5]])
        X = log_ratio_transform(table, "c2")
        assert np.allclose(X.to_numpy(), [[np.log(0.4), np.log(0.6)]])
        assert list(X.columns) == ["c0", "c1"]

    def test_equal_components_give_zero(self):
        table = small_table([[0.25, 0.25, 0.25, 0.25]])
        X = log_ratio_transform(table, "c3")
        assert np.allclose(X.to_numpy(), 0.0)

    def test_denominator_change_is_affine(self):
        rng = np.random.default_rng(1)
        raw = rng.uniform(0.1, 3.0, (8, 4))
        table = small_table(raw / raw.sum(axis=1, keepdims=True))
        Xa = log_ratio_transform(table, "c3").to_numpy()
        Xb = log_ratio_transform(table, "c0").to_numpy()
        # X_b = L X_a + c exactly: solve for the affine map on an augmented
        # system and check the fit is exact
        design = np.column_stack([Xa, np.ones(len(Xa))])
        coef, *_ = np.linalg.lstsq(design, Xb, rcond=None)
        assert np.abs(design @ coef - Xb).max() < 1e-10

    def test_nonpositive_rejected(self):
        with pytest.raises(NonpositiveComponent):
            log_ratio_transform(small_table([[0.0, 1.0]]), "c1")


class TestResponseTransform:
    def test_midpoint_is_zero(self):
        assert response_transform([5e5])[0] == pytest.approx(0.0, abs=1e-15)

    def test_monotone(self):
        rng = np.random.default_rng(2)
        v = np.sort(rng.uniform(1.0, 1e6 - 1.0, 50))
        y = response_transform(v)
        assert np.all(np.diff(y) > 0)

    def test_inverse_point(self):
        assert response_transform([1e6 / (1.0 + np.e)])[0] == pytest.approx(-1.0, abs=1e-12)

    def test_out_of_range(self):
        for bad in ([0.0], [1e6], [-3.0], [2e6]):
            with pytest.raises(OutOfRange):
                response_transform(bad)


class TestDenominatorInvariance:
    @staticmethod
    def _designs():
        table, ree = make_synthetic_geochem(seed=5)
        table, _ = replace_below_threshold(table)
        cols = list(table.components.columns)
        table = subcomposition_normalize(table, cols)
        Y = response_transform(ree).reshape(-1, 1)
        designs = {
            den: log_ratio_transform(table, den).to_numpy()
            for den in ("Al2O3", "SiO2")
        }
        return table, Y, designs

    def test_gls_fitted_values_match_at_common_theta(self):
        # log-ratio designs with different denominators span the same affine
        # space, so GLS fitted values at any fixed theta coincide exactly
        from spenvelope.gls import gls_coefficients
        from spenvelope.spatial import CorrelationParams

        table, Y, designs = self._designs()
        theta = CorrelationParams(tau=0.3, lam=0.4)
        fitted = {}
        for den, X in designs.items():
            data = SpatialDataset(sites=SiteSet(table.coords), Y=Y, X=X)
            mu, beta = gls_coefficients(data, theta)
            fitted[den] = mu[None, :] + X @ beta
        assert np.abs(fitted["Al2O3"] - fitted["SiO2"]).max() < 1e-10

    def test_gls_fitted_values_match_end_to_end(self):
        # with theta re-estimated per design the agreement is limited by the
        # optimizer's float-noise floor in theta-hat (about 1e-6), which
        # propagates to fitted values at the 1e-8 scale
        table, Y, designs = self._designs()
        fitted = {}
        for den, X in designs.items():
            data = SpatialDataset(sites=SiteSet(table.coords), Y=Y, X=X)
            fit = fit_full_model(data)
            fitted[den] = fit.mu_YgX[None, :] + X @ fit.beta
        assert np.abs(fitted["Al2O3"] - fitted["SiO2"]).max() < 1e-6


class TestSyntheticFixture:
    def test_shape_and_thresholds(self):
        table, ree = make_synthetic_geochem(seed=0)
        assert table.components.shape == (53, 11)
        assert table.coords.shape == (53, 2)
        assert len(np.unique(table.coords, axis=0)) == 14
        assert "TiO2" in table.thresholds
        assert (table.components["TiO2"] < table.thresholds["TiO2"]).sum() >= 3
        assert np.all((ree > 0) & (ree < 1e6))

    def test_deterministic(self):
        t1, r1 = make_synthetic_geochem(seed=3)
        t2, r2 = make_synthetic_geochem(seed=3)
        assert t1.components.equals(t2.components)
        assert np.array_equal(r1, r2)
