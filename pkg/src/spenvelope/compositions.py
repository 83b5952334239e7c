"""Compositional-data ingestion: detection thresholds, subcompositions,
log-ratio predictors, and the bounded-response transform.

Concentration data live on a simplex (components of a sample sum to a
constant), so raw components cannot be used as regression variables.  The
pipeline here follows the usual log-ratio treatment:

* censored values (below the instrument detection threshold) are replaced by
  half the threshold;
* a chosen subcomposition is renormalized so its relative proportions are
  studied rather than absolute concentrations;
* the subcomposition is mapped to unconstrained predictors by log-ratios
  against an arbitrary denominator component (the choice of denominator
  changes the predictors by an invertible affine map only);
* a concentration response in ppm is mapped to the real line by
  y = log(v / (1e6 - v)).

A synthetic generator shaped like a small field survey (53 samples over 14
distinct locations, 11 components plus a trace-element total) ships here so
the full pipeline can run without any proprietary data.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .errors import DimensionError, MissingThreshold, NonpositiveComponent, OutOfRange
from .spatial import CorrelationParams, SiteSet, build_correlation

__all__ = [
    "CompositionTable",
    "replace_below_threshold",
    "subcomposition_normalize",
    "log_ratio_transform",
    "response_transform",
    "make_synthetic_geochem",
]

PPM_TOTAL = 1e6


@dataclass(frozen=True)
class CompositionTable:
    """Nonnegative component concentrations with site coordinates.

    components is an n x k DataFrame (one named column per component);
    thresholds optionally maps component names to detection limits.
    """

    components: pd.DataFrame
    coords: np.ndarray
    thresholds: dict | None = None

    def __post_init__(self):
        coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        if coords.shape != (len(self.components), 2):
            raise DimensionError(
                f"coords must be ({len(self.components)}, 2), got {coords.shape}"
            )
        if (self.components.to_numpy() < 0).any():
            raise DimensionError("component concentrations must be nonnegative")
        if self.thresholds is not None:
            unknown = set(self.thresholds) - set(self.components.columns)
            if unknown:
                raise DimensionError(f"thresholds for unknown columns: {sorted(unknown)}")
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return len(self.components)


def replace_below_threshold(
    table: CompositionTable, columns: list[str] | None = None
) -> tuple[CompositionTable, int]:
    """Replace values strictly below their detection threshold by threshold/2.

    columns defaults to every column that has a threshold.  Returns the new
    table and the number of replaced values.

    Raises
    ------
    MissingThreshold
        If called without thresholds, or for a column that has none.
    """
    if table.thresholds is None:
        raise MissingThreshold("table carries no detection thresholds")
    if columns is None:
        columns = sorted(table.thresholds)
    missing = [c for c in columns if c not in table.thresholds]
    if missing:
        raise MissingThreshold(f"no threshold for columns: {missing}")

    comp = table.components.copy()
    count = 0
    for col in columns:
        thr = float(table.thresholds[col])
        below = comp[col] < thr
        count += int(below.sum())
        comp.loc[below, col] = thr / 2.0
    return replace(table, components=comp), count


def subcomposition_normalize(table: CompositionTable, columns: list[str]) -> CompositionTable:
    """Normalize the selected columns so they sum to one within each row.

    Only the selected columns change; they must be strictly positive.
    """
    missing = [c for c in columns if c not in table.components.columns]
    if missing:
        raise DimensionError(f"unknown columns: {missing}")
    comp = table.components.copy()
    block = comp[columns].to_numpy(dtype=float)
    if (block <= 0).any():
        raise NonpositiveComponent(
            "subcomposition requires strictly positive components "
            "(apply threshold replacement first)"
        )
    comp[columns] = block / block.sum(axis=1, keepdims=True)
    return replace(table, components=comp)


def log_ratio_transform(table: CompositionTable, denominator_column: str) -> pd.DataFrame:
    """Log-ratios of every other component against the denominator, n x (k-1).

    Column order is preserved.  Switching the denominator applies an
    invertible affine map to the predictors, so full-regression fitted values
    are denominator-invariant.
    """
    cols = list(table.components.columns)
    if denominator_column not in cols:
        raise DimensionError(f"unknown denominator column {denominator_column!r}")
    values = table.components.to_numpy(dtype=float)
    if (values <= 0).any():
        raise NonpositiveComponent("log-ratios need strictly positive components")
    den = table.components[denominator_column].to_numpy(dtype=float)
    keep = [c for c in cols if c != denominator_column]
    out = np.log(table.components[keep].to_numpy(dtype=float) / den[:, None])
    return pd.DataFrame(out, columns=keep, index=table.components.index)


def response_transform(ree_ppm) -> np.ndarray:
    """log(v / (1e6 - v)) for concentrations in ppm, strictly inside (0, 1e6)."""
    v = np.asarray(ree_ppm, dtype=float)
    if np.any(~np.isfinite(v)) or np.any(v <= 0.0) or np.any(v >= PPM_TOTAL):
        raise OutOfRange("ppm values must lie strictly between 0 and 1e6")
    return np.log(v / (PPM_TOTAL - v))


_ELEMENTS = [
    "CaO", "Fe2O3", "K2O", "LOI", "MgO", "MnO", "Na2O", "P2O5", "SiO2", "TiO2", "Al2O3",
]


def make_synthetic_geochem(seed: int = 0) -> tuple[CompositionTable, np.ndarray]:
    """Synthetic survey shaped like a small geochemical campaign.

    53 samples at 14 distinct locations on the unit square; 11 major-element
    columns forming a composition; a trace-element total in ppm that depends
    on a few of the log-ratios plus a spatially correlated residual.  A
    detection threshold is attached to TiO2 and a few values are pushed
    below it so the censoring path is exercised.  Returns the table and the
    raw ppm response.
    """
    rng = np.random.default_rng(seed)
    n, k = 53, len(_ELEMENTS)
    locations = rng.uniform(0.0, 1.0, (14, 2))
    # every location appears at least once; the rest are resampled sites
    assign = np.concatenate([np.arange(14), rng.integers(0, 14, n - 14)])
    coords = locations[assign] + 0.0

    # latent log-abundances with spatial correlation shared across columns
    factor = build_correlation(SiteSet(coords), CorrelationParams(tau=0.3, lam=0.4))
    base = np.log(rng.uniform(0.5, 8.0, k))
    latent = base[None, :] + 0.6 * (factor.chol_lower @ rng.standard_normal((n, k)))
    comp = np.exp(latent)
    comp /= comp.sum(axis=1, keepdims=True)

    df = pd.DataFrame(comp, columns=_ELEMENTS)
    # depress a few TiO2 values below a detection limit
    thr = float(np.quantile(df["TiO2"], 0.08))
    low = rng.choice(n, size=3, replace=False)
    df.loc[low, "TiO2"] = thr * rng.uniform(0.1, 0.8, size=3)

    # trace total driven by K2O and P2O5 enrichment relative to Al2O3
    signal = (
        2.0 * np.log(df["K2O"] / df["Al2O3"])
        + 1.2 * np.log(df["P2O5"] / df["Al2O3"])
        - 0.8 * np.log(df["SiO2"] / df["Al2O3"])
    ).to_numpy()
    noise = 0.45 * (factor.chol_lower @ rng.standard_normal(n))
    log_odds = -6.5 + 0.9 * (signal - signal.mean()) + noise
    ree_ppm = PPM_TOTAL / (1.0 + np.exp(-log_odds))

    table = CompositionTable(
        components=df, coords=coords, thresholds={"TiO2": thr}
    )
    return table, ree_ppm
