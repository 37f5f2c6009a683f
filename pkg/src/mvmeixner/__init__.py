"""Multivariate Meixner polynomials as birth-and-death eigenpolynomials.

Construction (secular eigenproblem -> u -> dual rates), two independent
evaluation routes (terminating matrix sum vs generating-function expansion),
lattice operators with factorization and eigen-identity checks, and the
spectral transition probability cross-validated by exact-jump simulation.
"""

from .errors import (
    CMassNotBelowOne,
    ConfigError,
    ConstraintViolation,
    DegenerateParameters,
    DegreeCapExceeded,
    MeixnerError,
    NegativeTime,
    NonPositiveBeta,
    NonPositiveC,
    ParameterError,
    SingularGenfun,
    TailTooLarge,
    TruncationBoundary,
)
from .model import (
    LatticeTruncation,
    ModelParams,
    enumerate_lattice,
    shifted_factorial,
    tail_bound,
    validate_params,
    weight,
)
from .polynomials import (
    TruncatedSeries,
    genfun_eval,
    meixner_1d,
    meixner_eval,
    poly_table,
)
from .spectral import (
    SpectralData,
    build_u,
    characteristic_matrix,
    degenerate_spectrum,
    solve,
    solve_spectrum,
)
from .operators import (
    LatticeFunction,
    apply_Htilde,
    build_H,
    build_LBD,
    eigen_check,
    factorization_check,
    genfun_identity_check,
)
from .bdprocess import (
    chapman_kolmogorov_check,
    compare_sim_spectral,
    moment_check,
    orthogonality_check,
    phi_hat,
    simulate,
    transition_prob,
)

__version__ = "0.1.0"

__all__ = [
    "CMassNotBelowOne",
    "ConfigError",
    "ConstraintViolation",
    "DegenerateParameters",
    "DegreeCapExceeded",
    "LatticeFunction",
    "LatticeTruncation",
    "MeixnerError",
    "ModelParams",
    "NegativeTime",
    "NonPositiveBeta",
    "NonPositiveC",
    "ParameterError",
    "SingularGenfun",
    "SpectralData",
    "TailTooLarge",
    "TruncatedSeries",
    "TruncationBoundary",
    "apply_Htilde",
    "build_H",
    "build_LBD",
    "build_u",
    "chapman_kolmogorov_check",
    "characteristic_matrix",
    "compare_sim_spectral",
    "degenerate_spectrum",
    "eigen_check",
    "enumerate_lattice",
    "factorization_check",
    "genfun_eval",
    "genfun_identity_check",
    "meixner_1d",
    "meixner_eval",
    "moment_check",
    "orthogonality_check",
    "phi_hat",
    "poly_table",
    "shifted_factorial",
    "simulate",
    "solve",
    "solve_spectrum",
    "tail_bound",
    "transition_prob",
    "validate_params",
    "weight",
]
