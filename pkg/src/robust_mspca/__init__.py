"""Distributionally robust low-rank projections from multi-source data."""

from .dual import DualReport, dual_solve, phi, phi_subgrad, tightness_check
from .errors import (
    DegenerateInstance,
    InvalidArgument,
    InvalidMatrix,
    InvalidRank,
    IoError,
    NumericalError,
    ParseError,
    RobustMspcaError,
    ShapeError,
)
from .mirrorprox import (
    FantopePoint,
    SimplexWeights,
    SolveReport,
    StepSizes,
    certificate,
    default_step_sizes,
    duality_gap,
    fantope_mirror_update,
    simplex_mirror_update,
    solve,
    waterfill_nu,
)
from .moments import (
    SecondMomentSet,
    SourceSamples,
    compute_second_moment,
    load_moment_matrices,
    load_sources,
    rescale_by_max_opnorm,
)
from .simulate import (
    FactorModelSpec,
    TwoFeatureSpec,
    capture_error,
    gen_factor_sources,
    gen_two_feature_sources,
    ood_eval,
    pooled_pca,
    recovery_error,
    worst_case_explained_variance,
)
from .spectral import (
    EigenPairs,
    ProjectionMatrix,
    ky_fan_value,
    log_spectrum,
    operator_norm,
    sym_eig,
    top_k_projector,
)
from .variants import VARIANTS, shift_matrices, solve_variant

__version__ = "0.1.0"

__all__ = [
    "DualReport", "dual_solve", "phi", "phi_subgrad", "tightness_check",
    "DegenerateInstance", "InvalidArgument", "InvalidMatrix", "InvalidRank",
    "IoError", "NumericalError", "ParseError", "RobustMspcaError", "ShapeError",
    "FantopePoint", "SimplexWeights", "SolveReport", "StepSizes", "certificate",
    "default_step_sizes", "duality_gap", "fantope_mirror_update",
    "simplex_mirror_update", "solve", "waterfill_nu",
    "SecondMomentSet", "SourceSamples", "compute_second_moment",
    "load_moment_matrices", "load_sources", "rescale_by_max_opnorm",
    "FactorModelSpec", "TwoFeatureSpec", "capture_error", "gen_factor_sources",
    "gen_two_feature_sources", "ood_eval", "pooled_pca", "recovery_error",
    "worst_case_explained_variance",
    "EigenPairs", "ProjectionMatrix", "ky_fan_value", "log_spectrum",
    "operator_norm", "sym_eig", "top_k_projector",
    "VARIANTS", "shift_matrices", "solve_variant",
]
