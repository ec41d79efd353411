"""
Constants and defaults for towerlab

Contains experiment kinds, domain kinds, solver methods, numerical defaults
and exit codes used throughout the library and the CLI.
"""


class ExperimentKinds:
    """Run kinds understood by the harness (one per CLI subcommand)"""
    PARAMS = "params"
    ANSATZ = "ansatz"
    RESIDUAL_SCAN = "residual-scan"
    LINEAR_SPECTRUM = "linear-spectrum"
    SOLVE = "solve"
    LIMIT_CHECKS = "limit-checks"

    ALL = [PARAMS, ANSATZ, RESIDUAL_SCAN, LINEAR_SPECTRUM, SOLVE, LIMIT_CHECKS]


class DomainKinds:
    """Centrally symmetric domains with a pole at the origin"""
    DISK = "disk"
    RECTANGLE = "rectangle"

    ALL = [DISK, RECTANGLE]


class ProjectionModes:
    """How P w is computed"""
    EXACT = "exact"            # w plus the harmonic extension of -w on the boundary
    ASYMPTOTIC = "asymptotic"  # closed form, drops the O(delta^alpha) remainder

    ALL = [EXACT, ASYMPTOTIC]


class SolverMethods:
    """Correction strategies for the solve subcommand"""
    CONTRACTION = "contraction"
    NEWTON = "newton"
    BOTH = "both"

    ALL = [CONTRACTION, NEWTON, BOTH]


class MeshDefaults:
    """Log-radial mesh defaults"""
    DENSITY = 64                    # nodes per unit of s = ln r
    MARGIN = 6.0                    # s_min = ln(delta_1) - MARGIN
    MIN_NODES_PER_DECADE = 3        # below this nothing is resolved
    ANSATZ_NODES_PER_DECADE = 8     # assembly refuses coarser meshes


class QuadratureDefaults:
    """Graded Gauss-Legendre on t = r^alpha / (1 + r^alpha)"""
    ORDER = 16
    RTOL = 1e-12
    MIN_LEVELS = 4
    MAX_LEVELS = 56


class GridDefaults:
    """Finite-difference grid for rectangles (odd so the origin is a node)"""
    POINTS = 257
    IMAGE_TERMS = 200


class NormDefaults:
    """L^p exponents; residual bounds hold only for p in [1, 1 + eps) with eps small"""
    P = 1.0
    ALL_P = [1.0, 1.05, 1.1]
    SLOPE_SLACK = 0.05
    MIN_SWEEP_POINTS = 4
    MIN_SWEEP_DECADES = 3.0


class SolverDefaults:
    """Contraction / Newton settings"""
    CONTRACTION_TOL = 1e-11
    CONTRACTION_MAX_ITER = 60
    DIVERGENCE_STEPS = 3
    NEWTON_TOL = 1e-11
    NEWTON_MAX_ITER = 40
    NEWTON_STEP_RTOL = 1e-10       # steps below this (relative, energy norm) are rounding noise
    ARMIJO_HALVINGS = 20
    ARMIJO_C = 1e-4
    FARFIELD_ANNULUS = (0.4, 0.8)   # fraction of the domain radius
    R_CUT_FRACTION = 0.5            # of the inradius
    MOSER_TRUDINGER_C = 10.0


class EigenDefaults:
    """Shift-invert settings for sigma_min"""
    TOL = 1e-10
    MAX_ITER = 200
    BAND = 5.0


class ExitCodes:
    """Process exit codes of the towerlab CLI"""
    OK = 0
    EXECUTION_ERROR = 1
    CHECK_FAILED = 2


# Environment variable selecting the registry root
REGISTRY_ENV = "TOWERLAB_REGISTRY"
DEFAULT_REGISTRY_DIR = "towerlab-registry"

# Largest exponent handed to numpy.exp
EXP_LIMIT = 700.0
