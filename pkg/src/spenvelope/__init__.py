"""Spatial predictor envelopes.

Likelihood-based dimension reduction of the predictors in spatial linear
regression under a separable Gaussian-process model, with the full GLS
regression as baseline, asymptotic inference, kriging prediction, dimension
selection, Monte-Carlo scenarios, and a compositional-data pipeline.
"""

__version__ = "0.1.0"

from .asymptotics import (
    avar_all,
    avar_beta,
    avar_beta_components,
    duplication_matrix,
    elimination_matrix,
    fisher_full,
    z_scores,
)
from .compositions import (
    CompositionTable,
    log_ratio_transform,
    make_synthetic_geochem,
    replace_below_threshold,
    response_transform,
    subcomposition_normalize,
)
from .envelope import (
    CoordinateParam,
    DimensionSelection,
    EnvelopeBasis,
    SpeFit,
    fit_spe,
    recover_basis,
    select_dimension,
    spe_objective,
    spe_objective_unconstrained,
    spe_param_count,
)
from .errors import (
    DimensionError,
    MissingThreshold,
    NonpositiveComponent,
    OptimFailure,
    OutOfRange,
    RankDeficiency,
    SingularCorrelation,
    SingularCovariance,
    SingularInformation,
    SpenvelopeError,
)
from .gls import (
    AdjustedCovariances,
    GlsFit,
    OptimOptions,
    adjusted_covariances,
    fit_full_model,
    gls_coefficients,
    joint_profile_loglik,
    known_theta_variances,
)
from .prediction import (
    IDENTITY_CORRELATION,
    CvReport,
    ModelSpec,
    PredictionRequest,
    cross_validate,
    krige_predict,
    mspe,
)
from .simulate import (
    SimConfig,
    SimResult,
    preset_fingerprint,
    random_orthobasis,
    run_scenario,
    scenario_config,
    subspace_angle,
)
from .spatial import (
    CorrelationFactor,
    CorrelationParams,
    JointModelParams,
    SiteSet,
    SpatialDataset,
    build_correlation,
    correlation,
    cross_correlation,
    sample_joint_gp,
)
