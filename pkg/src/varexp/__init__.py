"""Variable-exponent Lebesgue/Sobolev norms and p(x)-Laplacian eigenpairs."""

from varexp.mesh import Mesh, GridFunction, CellVectorField, gradient, interpolate, refine, zero_boundary
from varexp.exponent import (
    AdmissibilityError,
    ExponentField,
    ExponentSequence,
    build_field,
    build_sequence,
    uniform_distance,
    validate_admissible,
)
from varexp.modular import (
    embedding_constant,
    holder_check,
    luxemburg_norm,
    modular,
    unit_ball_check,
)
from varexp.rayleigh import (
    EigenPair,
    SolverConfig,
    SolverNotConverged,
    K,
    K_prime_action,
    S,
    concentration_probe,
    constant_p_first_eigenvalue_1d,
    constant_p_higher_eigenvalue_1d,
    el_residual,
    inhomogeneous_ratio,
    k,
    k_prime_action,
    rayleigh_ratio,
    solve_first_eigenpair,
)

__version__ = "0.1.0"
