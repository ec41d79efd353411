"""
TowerLab Python Library

Numerics for sign-changing towers of bubbles of the sinh-Poisson equation
-Laplace u = lambda (e^u - e^-u) with Dirichlet data on a centrally symmetric
domain: closed-form limit profiles, Green's functions, the tower ansatz, its
error terms, the linearized operator, correction solvers and a run harness.

Example:
    ```python
    from towerlab import DomainSpec, select_parameters, assemble_ansatz, solve_tower

    params = select_parameters(k=2, lam=1e-3)
    print(params.delta)                  # nested scales delta_1 << delta_2

    ansatz = assemble_ansatz(params, DomainSpec.disk())
    result = solve_tower(1, 1e-3, method="both")
    print(result.masses, result.path_gap)
    ```

Version: 1.0.0
License: MIT
"""

from .core.exceptions import (
    TowerLabError,
    InvalidParameterError,
    ConfigurationError,
    DomainError,
    ResolutionError,
    LinearSolveError,
    ContractionDivergedError,
    NewtonError,
    AsymptoticRegimeWarning,
)
from .core.mesh import RadialMesh, RadialField
from .limit_profiles import Profile, bubble_value, limit_mass, kernel_integrals, stereographic_norm_ratio
from .greens import DomainSpec, green_origin, robin_at_origin, harmonic_extension
from .tower import BubbleParams, select_parameters, assemble_ansatz, theta_certificate
from .residual import residual_field, linear_error_field, lp_norm, residual_sweep
from .linearized import (build_operator, discretization_floor, min_singular_value, min_singular_sweep,
                         z_projection_check)
from .solver import (
    SolveResult,
    contraction_iterate,
    newton_solve,
    solve_tower,
    continuation_sweep,
    masses,
    ohtsuka_suzuki_check,
    farfield_compare,
)

__version__ = "1.0.0"
__license__ = "MIT"

# Public API
__all__ = [
    # Exceptions
    "TowerLabError",
    "InvalidParameterError",
    "ConfigurationError",
    "DomainError",
    "ResolutionError",
    "LinearSolveError",
    "ContractionDivergedError",
    "NewtonError",
    "AsymptoticRegimeWarning",

    # Mesh
    "RadialMesh",
    "RadialField",

    # Profiles and Green's functions
    "Profile",
    "bubble_value",
    "limit_mass",
    "kernel_integrals",
    "stereographic_norm_ratio",
    "DomainSpec",
    "green_origin",
    "robin_at_origin",
    "harmonic_extension",

    # Tower and errors
    "BubbleParams",
    "select_parameters",
    "assemble_ansatz",
    "theta_certificate",
    "residual_field",
    "linear_error_field",
    "lp_norm",
    "residual_sweep",

    # Linear theory and solvers
    "build_operator",
    "min_singular_value",
    "min_singular_sweep",
    "discretization_floor",
    "z_projection_check",
    "SolveResult",
    "contraction_iterate",
    "newton_solve",
    "solve_tower",
    "continuation_sweep",
    "masses",
    "ohtsuka_suzuki_check",
    "farfield_compare",
]
