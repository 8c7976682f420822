"""recval: recursive-utility fixed points on unbounded Markov state spaces.

Solves, verifies, and stress-tests the exponential certainty-equivalent
(robust / risk-sensitive), belief-space (learning), and Epstein-Zin value
recursions: closed-form affine solutions, envelope-started monotone
iteration, truncated contraction solves with error bounds, worst-case
change-of-measure kernels, and exponential-Orlicz tail diagnostics.

All numerics are pure functions of their inputs and explicit seeds, so
runs are reproducible and safe to parallelize externally.
"""

from .grids import GridFunction, StateGrid, grid_build, interp_eval
from .models import (
    DEFAULT_QUAD,
    DisasterArgModel,
    DivergenceError,
    GaussianStateSpaceModel,
    GaussianVar1Model,
    HiddenRegimeModel,
    QuadratureSpec,
    RegimeSwitchVarModel,
    SsyVolModel,
    StationaryLaw,
    arg_laplace,
    cond_expect,
    model_from_config,
    sample_stationary,
    sample_transition,
    stationary_law,
    stationary_pairs,
)
from .filters import RiccatiConvergenceError, SteadyFilter, kalman_steady_state, regime_filter_update
from .orlicz import OrliczEstimate, ThinTailReport, orlicz_norm, thin_tail_check
from .operators import (
    DistortedKernel,
    EzSpec,
    LearningSpec,
    RadiusDiagnostic,
    RobustSpec,
    apply_robust,
    apply_subgradient,
    apply_truncated,
    spectral_radius_est,
    undistorted_kernel,
    worst_case_density,
)
from .learning import apply_learning
from .epstein_zin import (
    EzEigenpair,
    EigenvalueCondition,
    apply_ez,
    eigenvalue_condition,
    ez_eigenpair,
    ez_envelope,
    ez_operator,
    ez_recover,
    ez_recursion_residual,
    sdf_evaluate,
)
from .solvers import (
    AffineSolution,
    ContractionError,
    DisasterParams,
    FixedPointResult,
    IterationTrace,
    affine_map_iterate,
    affine_map_step,
    affine_solve_disaster,
    affine_solve_gaussian_robust,
    contraction_solve,
    disaster_affine_residual,
    disaster_reduced_params,
    lower_envelope_robust,
    monotone_solve,
    robust_operator,
    truncated_operator,
    truncation_gap_check,
    upper_envelope_robust,
)

__version__ = "0.1.0"
