"""widthlab: a numerical laboratory for Haar-coefficient certificates of
subspace approximation lower bounds, with empirical n-scans and scaling fits.
"""

from .errors import (
    CapacityError,
    ConfigError,
    EmptySubspaceError,
    EvaluationError,
    LemmaRegimeError,
    ParameterError,
    ShapeError,
    WidthlabError,
)
from .haar_core import (
    CoefVector,
    DyadicIndex,
    LevelRange,
    PiecewisePolynomial,
    dyadic_gauss_nodes,
    haar_coefficient,
    haar_coefficients,
    integrate_exact,
    pack_lq_norm_q,
    step_function,
    weighted_inner,
    weighted_norm,
)
from .step_profiles import (
    A,
    x_profile,
    x_profile_pp,
    x_vector,
    z_gram,
    z_moments,
    z_profile,
    z_profile_pp,
    z_vector,
)
from .approximants import (
    ApproximantFamily,
    BestLqResult,
    Subspace,
    best_l2_family,
    best_lq_family,
    best_lq_on_grid,
    family_haar_truncation,
    family_random,
    family_uniform_spline,
    orthonormalize,
    project,
    sup_error_scan,
    zero_family,
)
from .certificate import (
    DEFAULT_DELTA,
    CertificateConfig,
    CertificateReport,
    calibrate_delta,
    certify_subspace,
    compute_I1,
    compute_I2,
    compute_I3,
    holder_lower_bound,
    level_range,
    projected_isotropy,
    smallest_conforming_n,
)
from .oracle import QuadEstimate, grid_integral, haar_coefficient_direct, mc_integral

__version__ = "0.1.0"
