"""Front speeds and spreading shapes for KPP invasion in stratified periodic media.

The package computes principal eigenvalues of periodic cell operators with
drift (including for measure-valued coefficients such as periodic Dirac
combs), turns the dispersion relation into minimal front speeds and
directional spreading speeds, builds the asymptotic invasion polygon, and
cross-validates everything against a direct finite-difference simulation of
the Cauchy problem.
"""

from .comb import CombDispersion, comb_curve_to_csv, comb_mu, comb_mu_large_L, comb_mu_zero_lambda
from .eigen import (
    DispersionMethod,
    DispersionSample,
    VariationalCertificate,
    adjoint_psi,
    dispersion_curve,
    mu_grid,
    nadin_value,
    reconstruct_psi_from_eta,
    transfer_matrix_mu,
)
from .errors import (
    EstimationError,
    NumericalFailureError,
    ParameterDomainError,
    StratafrontError,
    UnsupportedRepresentationError,
)
from .media import (
    MediumKind,
    PeriodicMedium,
    ReactionKind,
    ReactionSpec,
    constant_medium,
    load_medium,
    make_dirac_comb,
    mollify,
    piecewise_constant_medium,
    random_medium,
    sample_on_grid,
    sampled_medium,
    save_medium,
)
from .sim import (
    FrontTrace,
    SimConfig,
    SimResult,
    fit_front_speed,
    run_cauchy,
    run_cauchy_2d,
    shape_snapshot,
    steady_state_1d,
)
from .speeds import (
    AsymptoticRegime,
    MonotonicityReport,
    OptimalityReport,
    SpeedResult,
    WulffShape,
    asymptotic_reference,
    c_star,
    monotonicity_check,
    optimality_check,
    spreading_speed,
    wulff_shape,
)
from .torus2d import (
    TorusMedium,
    UnboundednessReport,
    concentrating_medium,
    stratified_torus_medium,
    torus_c_star,
    torus_mu,
    unboundedness_demo,
)

__version__ = "0.1.0"
