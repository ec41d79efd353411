"""
Tower-of-bubbles ansatz

    W = sum_i (-1)^i P w_i,   alpha_i = 4i - 2,   delta_1 << ... << delta_k

Parameters are chosen so that, inside the annulus where bubble j dominates,
the interaction function

    Theta_j(y) = (-1)^j W(delta_j y) - w_j(delta_j y) - (alpha_j - 2) ln|delta_j y| + ln(lambda)

is small. All parameter arithmetic runs on ln(delta); delta_1 reaches 1e-40
for moderate k and lambda.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core.exceptions import (AsymptoticRegimeWarning, InvalidParameterError, ResolutionError,
                              TowerLabError)
from .core.mesh import RadialField, RadialMesh
from .core.validation import validate_choices, validate_finite, validate_integer, validate_positive
from .greens import DomainSpec, GridField, green_data, robin_at_origin
from .limit_profiles import log_bubble_terms
from .utils.constants import MeshDefaults, ProjectionModes

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


# ========================================
# PARAMETERS
# ========================================

@dataclass(frozen=True)
class BubbleParams:
    """Per-level (alpha_i, ln delta_i, ln d_i) plus k, ln(lambda) and H(0,0)"""
    k: int
    log_lambda: float
    alpha: Tuple[int, ...]
    log_delta: Tuple[float, ...]
    log_d: Tuple[float, ...]
    h00: float = 0.0

    @property
    def lam(self) -> float:
        return math.exp(self.log_lambda)

    @property
    def delta(self) -> np.ndarray:
        return np.exp(np.asarray(self.log_delta))

    @property
    def d(self) -> np.ndarray:
        return np.exp(np.asarray(self.log_d))

    @property
    def exponents(self) -> Tuple[float, ...]:
        """(2(k - i) + 1) / alpha_i, the power of lambda in delta_i"""
        return tuple((2 * (self.k - i) + 1) / a for i, a in enumerate(self.alpha, start=1))

    @property
    def h_values(self) -> Tuple[float, ...]:
        """h_i(0) = 4 pi alpha_i H(0,0)"""
        return tuple(4.0 * math.pi * a * self.h00 for a in self.alpha)

    def level(self, j: int) -> Tuple[int, float]:
        validate_integer('j', j, min_val=1)
        if j > self.k:
            raise InvalidParameterError('j', j, f"Must be <= k={self.k}")
        return self.alpha[j - 1], self.log_delta[j - 1]


def alpha_levels(k: int) -> Tuple[int, ...]:
    return tuple(4 * i - 2 for i in range(1, k + 1))


def select_parameters(k: int, lam: float, h00: float = 0.0) -> BubbleParams:
    """
    Solve the balance conditions for ln(delta_i):

        alpha_k ln d_k  = S_k - ln(2 alpha_k^2) + ln lambda
        alpha_j ln d_j  = alpha_{j+1} ln d_{j+1} + 2 ln lambda - ln(4 alpha_j^2 alpha_{j+1}^2)

    with S_j = (-1)^(k-j) 8 k pi H(0,0); H(0,0) cancels in the recursion.
    """
    validate_integer('k', k, min_val=1)
    validate_positive('lambda', lam)
    validate_finite('h00', h00)
    if lam >= 1.0:
        warnings.warn(f"lambda={lam} >= 1: the tower is an asymptotic construction for small lambda",
                      AsymptoticRegimeWarning, stacklevel=2)
    log_lam = math.log(lam)
    alpha = alpha_levels(k)
    a_log_delta = [0.0] * k
    s_k = 8.0 * k * math.pi * h00
    a_log_delta[k - 1] = s_k - math.log(2.0 * alpha[k - 1] ** 2) + log_lam
    for j in range(k - 2, -1, -1):
        a_log_delta[j] = (a_log_delta[j + 1] + 2.0 * log_lam
                          - math.log(4.0 * alpha[j] ** 2 * alpha[j + 1] ** 2))
    log_delta = tuple(v / a for v, a in zip(a_log_delta, alpha))
    exponents = [(2 * (k - i) + 1) / a for i, a in enumerate(alpha, start=1)]
    log_d = tuple(ld - e * log_lam for ld, e in zip(log_delta, exponents))
    if any(b <= a for a, b in zip(log_delta[:-1], log_delta[1:])):
        logger.warning(f"delta_i not increasing for k={k}, lambda={lam:.3e}")
    params = BubbleParams(k, log_lam, alpha, log_delta, log_d, float(h00))
    logger.debug(f"k={k} lambda={lam:.3e}: ln delta = {np.round(log_delta, 6).tolist()}")
    return params


def params_for_domain(k: int, lam: float, domain: DomainSpec = None) -> BubbleParams:
    domain = domain or DomainSpec.disk()
    return select_parameters(k, lam, robin_at_origin(domain))


def check_alternating_sum(params: BubbleParams) -> int:
    """sum_i (-1)^i alpha_i, which must equal (-1)^k 2k"""
    total = sum((-1) ** i * a for i, a in enumerate(params.alpha, start=1))
    expected = (-1) ** params.k * 2 * params.k
    if total != expected:
        raise TowerLabError(f"Alternating sum {total} != {expected} for k={params.k}")
    return total


def exponent_identity(j: int) -> int:
    """(alpha_j - 2) + 2 sum_{i<j} (-1)^(i-j) alpha_i; zero for every j"""
    validate_integer('j', j, min_val=1)
    return (4 * j - 4) + 2 * sum((-1) ** (i - j) * (4 * i - 2) for i in range(1, j))


def scale_balance(params: BubbleParams, j: int) -> float:
    """
    Constant term of Theta_j in its own scale:

        S_j - ln(2 alpha_j^2) - alpha_j ln d_j - 2 sum_{i>j} (-1)^(i+j) alpha_i ln d_i + ln lambda
    """
    alpha_j, log_delta_j = params.level(j)
    s_j = (-1) ** (params.k - j) * 8.0 * params.k * math.pi * params.h00
    outer = sum((-1) ** (i + j) * params.alpha[i - 1] * params.log_delta[i - 1]
                for i in range(j + 1, params.k + 1))
    return s_j - math.log(2.0 * alpha_j ** 2) - alpha_j * log_delta_j - 2.0 * outer + params.log_lambda


def parameter_table(params: BubbleParams) -> List[Dict[str, float]]:
    """Rows (i, alpha_i, delta_i, d_i, exponent) for display and export"""
    return [
        {"i": i, "alpha": a, "delta": math.exp(ld), "log_delta": ld, "d": math.exp(lg),
         "exponent": e}
        for i, (a, ld, lg, e) in enumerate(zip(params.alpha, params.log_delta, params.log_d,
                                                params.exponents), start=1)
    ]


# ========================================
# ANNULI
# ========================================

@dataclass(frozen=True)
class AnnulusDecomposition:
    """radii[0] = 0 < radii[1] < ... < radii[k] = outer radius; A_j = [radii[j-1], radii[j]]"""
    radii: Tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.radii) - 1

    def annulus(self, j: int) -> Tuple[float, float]:
        validate_integer('j', j, min_val=1)
        if j > self.k:
            raise InvalidParameterError('j', j, f"Must be <= {self.k}")
        return self.radii[j - 1], self.radii[j]

    def index_of(self, r: np.ndarray) -> np.ndarray:
        """Annulus index (1-based) of each radius; interior radii belong to the inner annulus"""
        idx = np.searchsorted(np.asarray(self.radii[1:-1]), np.asarray(r), side='left') + 1
        return idx


def annulus_decomposition(params: BubbleParams, radius: float = 1.0) -> AnnulusDecomposition:
    """Boundaries sqrt(delta_{j-1} delta_j), with delta_0 = 0 and delta_{k+1} clipped to the domain"""
    validate_positive('radius', radius)
    inner = [math.exp(0.5 * (a + b)) for a, b in zip(params.log_delta[:-1], params.log_delta[1:])]
    radii = tuple([0.0] + inner + [float(radius)])
    if any(b <= a for a, b in zip(radii[:-1], radii[1:])):
        raise InvalidParameterError('radius', radius, "Annuli must be strictly increasing")
    return AnnulusDecomposition(radii)


# ========================================
# PROJECTIONS
# ========================================

@lru_cache(maxsize=64)
def _rectangle_correction(domain: DomainSpec, alpha: float, log_delta: float) -> GridField:
    """Harmonic extension of -w from the rectangle boundary"""
    data = green_data(domain)

    def minus_w(px, py):
        with np.errstate(divide='ignore'):
            log_r = np.log(np.hypot(px, py))
        return -log_bubble_terms(alpha, log_delta, log_r)

    return data.extend(minus_w)


def projection_correction(domain: DomainSpec, alpha: float, log_delta: float,
                          r: np.ndarray, mode: str = ProjectionModes.EXACT) -> np.ndarray:
    """P w - w along the positive x axis"""
    r = np.asarray(r, dtype=float)
    if domain.is_disk:
        big_r = math.log(domain.radius)
        if mode == ProjectionModes.EXACT:
            value = -log_bubble_terms(alpha, log_delta, np.asarray(big_r))
        else:
            value = -math.log(2.0 * alpha ** 2) - alpha * log_delta + 2.0 * alpha * big_r
        return np.full(r.shape, float(value))
    if mode == ProjectionModes.EXACT:
        return np.asarray(_rectangle_correction(domain, alpha, log_delta).at(r, np.zeros_like(r)))
    h = np.asarray(green_data(domain).h_field.at(r, np.zeros_like(r)))
    return -math.log(2.0 * alpha ** 2) - alpha * log_delta + 4.0 * math.pi * alpha * h


def _check_scale(domain: DomainSpec, log_delta: float) -> None:
    if log_delta >= math.log(domain.inradius):
        raise InvalidParameterError('delta', math.exp(log_delta),
                                    f"Must be below the inradius {domain.inradius}")


def project_bubble(domain: DomainSpec, alpha: float, log_delta: float,
                   mode: str = ProjectionModes.EXACT,
                   mesh: RadialMesh = None) -> Union[RadialField, GridField]:
    """
    P w: same Laplacian as w, zero on the boundary.

    Disk: a RadialField on `mesh` (exact mode is w - w(R)). Rectangle: a
    GridField on the Green's-function grid.
    """
    validate_choices('mode', mode, ProjectionModes.ALL)
    _check_scale(domain, log_delta)
    if domain.is_disk:
        if mesh is None:
            mesh = RadialMesh.for_scales(log_delta, domain.radius, domain.radial_density)
        w = log_bubble_terms(alpha, log_delta, mesh.s)
        return RadialField(mesh, w + projection_correction(domain, alpha, log_delta, mesh.r, mode))
    data = green_data(domain)
    xx, yy = np.meshgrid(data.x, data.y)
    with np.errstate(divide='ignore'):
        log_r = np.log(np.hypot(xx, yy))
    w = log_bubble_terms(alpha, log_delta, log_r)
    if mode == ProjectionModes.EXACT:
        correction = _rectangle_correction(domain, alpha, log_delta).values
    else:
        correction = (-math.log(2.0 * alpha ** 2) - alpha * log_delta
                      + 4.0 * math.pi * alpha * data.h_field.values)
    return GridField(data.x, data.y, w + correction)


@dataclass(frozen=True, eq=False)
class Ansatz:
    """Projected bubbles and W on a common radial mesh (plus the 2D grid on a rectangle)"""
    params: BubbleParams
    domain: DomainSpec
    mode: str
    mesh: RadialMesh
    bubbles: Tuple[RadialField, ...]
    W: RadialField
    grid_W: Optional[GridField] = field(default=None)

    @property
    def exact(self) -> bool:
        return self.mode == ProjectionModes.EXACT

    def boundary_value(self) -> float:
        if self.grid_W is not None:
            return self.grid_W.boundary_max()
        return abs(float(self.W.values[-1]))

    def evenness_defect(self) -> float:
        # radial fields are even by construction
        if self.grid_W is None:
            return 0.0
        return self.grid_W.evenness_defect()

    def decomposition(self) -> AnnulusDecomposition:
        return annulus_decomposition(self.params, self.mesh.radius)


def default_mesh(params: BubbleParams, domain: DomainSpec, density: float = None,
                 margin: float = MeshDefaults.MARGIN) -> RadialMesh:
    return RadialMesh.for_scales(params.log_delta[0], domain.radial_extent,
                                 density or domain.radial_density, margin)


def assemble_ansatz(params: BubbleParams, domain: DomainSpec = None,
                    mode: str = ProjectionModes.EXACT, mesh: RadialMesh = None) -> Ansatz:
    """W = sum_i (-1)^i P w_i on a mesh resolving delta_1"""
    domain = domain or DomainSpec.disk()
    validate_choices('mode', mode, ProjectionModes.ALL)
    mesh = mesh or default_mesh(params, domain)
    mesh.require_resolution(MeshDefaults.ANSATZ_NODES_PER_DECADE, "ansatz mesh")
    if mesh.s_min > params.log_delta[0]:
        raise ResolutionError(f"Mesh starts at r={mesh.r[0]:.3e}, above delta_1="
                              f"{math.exp(params.log_delta[0]):.3e}")
    if not math.isclose(mesh.radius, domain.radial_extent, rel_tol=1e-12):
        raise InvalidParameterError('mesh', mesh, f"Must end at r={domain.radial_extent}")

    bubbles = []
    total = np.zeros(mesh.size)
    for i, (alpha, log_delta) in enumerate(zip(params.alpha, params.log_delta), start=1):
        _check_scale(domain, log_delta)
        w = log_bubble_terms(alpha, log_delta, mesh.s)
        pw = RadialField(mesh, w + projection_correction(domain, alpha, log_delta, mesh.r, mode))
        bubbles.append(pw)
        total += (-1) ** i * pw.values

    grid_W = None
    if not domain.is_disk:
        grid_values = None
        for i, (alpha, log_delta) in enumerate(zip(params.alpha, params.log_delta), start=1):
            pw = project_bubble(domain, alpha, log_delta, mode)
            grid_values = (-1) ** i * pw.values if grid_values is None \
                else grid_values + (-1) ** i * pw.values
        grid_W = GridField(pw.x, pw.y, grid_values)

    ansatz = Ansatz(params, domain, mode, mesh, tuple(bubbles), RadialField(mesh, total), grid_W)
    logger.info(f"🏗️ Assembled k={params.k} tower at lambda={params.lam:.3e} ({mode}, {mesh})")
    return ansatz


# ========================================
# INTERACTION FUNCTION
# ========================================

def _radial_magnitude(y) -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    if arr.ndim >= 1 and arr.shape[-1] == 2:
        return np.hypot(arr[..., 0], arr[..., 1])
    return np.abs(arr)


def theta_values(params: BubbleParams, j: int, r: np.ndarray, domain: DomainSpec,
                 mode: str = ProjectionModes.EXACT) -> np.ndarray:
    """Theta_j at physical radii r = delta_j |y|, with the w_j cancellation done analytically"""
    alpha_j, log_delta_j = params.level(j)
    r = np.asarray(r, dtype=float)
    with np.errstate(divide='ignore'):
        log_r = np.log(r)
    total = projection_correction(domain, alpha_j, log_delta_j, r, mode) + params.log_lambda
    if alpha_j != 2:
        total = total - (alpha_j - 2) * log_r
    for i, (alpha, log_delta) in enumerate(zip(params.alpha, params.log_delta), start=1):
        if i == j:
            continue
        pw = log_bubble_terms(alpha, log_delta, log_r) + \
            projection_correction(domain, alpha, log_delta, r, mode)
        total = total + (-1) ** (i + j) * pw
    return total


def theta(params: BubbleParams, j: int, y, domain: DomainSpec = None,
          mode: str = ProjectionModes.EXACT) -> Union[float, np.ndarray]:
    """Theta_j(y) for scaled points y (or their magnitudes)"""
    domain = domain or DomainSpec.disk(math.exp(TWO_PI * params.h00))
    _, log_delta_j = params.level(j)
    mag = _radial_magnitude(y)
    lo, hi = annulus_decomposition(params, domain.radial_extent).annulus(j)
    delta_j = math.exp(log_delta_j)
    r = delta_j * mag
    if np.any(r < lo * (1 - 1e-12)) or np.any(r > hi * (1 + 1e-12)):
        warnings.warn(f"Theta_{j} evaluated outside A_{j}/delta_{j}; the smallness bound does not "
                      f"apply there", AsymptoticRegimeWarning, stacklevel=2)
    out = theta_values(params, j, r, domain, mode)
    return float(out) if np.ndim(out) == 0 else out


def theta_spread(values: Sequence[float]) -> float:
    """max / min of a list of required constants (1 for a single value, inf when min is zero)"""
    hi, lo = max(values), min(values)
    if lo <= 0.0:
        return 1.0 if hi <= 0.0 else math.inf
    return hi / lo


@dataclass
class ThetaCertificate:
    """Required constants C(lambda) = sup |Theta_j| / (delta_j |y| + lambda) per level"""
    k: int
    lambdas: List[float]
    required: Dict[int, List[float]]
    sup_theta: Dict[int, List[float]]
    growth: float = 2.0

    def ratios(self) -> Dict[int, float]:
        """Spread max C / min C of the required constant across the sweep, per level"""
        return {j: theta_spread(values) for j, values in self.required.items()}

    def verdicts(self) -> Dict[int, bool]:
        """A single constant per level: C(lambda) varies by less than `growth` across the sweep"""
        return {j: ratio < self.growth for j, ratio in self.ratios().items()}

    @property
    def passed(self) -> bool:
        return all(self.verdicts().values())

    def constants(self) -> Dict[int, float]:
        return {j: max(values) for j, values in self.required.items()}

    def rows(self) -> List[Dict[str, float]]:
        spreads = self.ratios()
        return [{"k": self.k, "j": j, "lambda": lam, "sup_theta": s, "required_C": c,
                 "ratio": spreads[j]}
                for j in sorted(self.required)
                for lam, s, c in zip(self.lambdas, self.sup_theta[j], self.required[j])]


def theta_certificate(k: int, lambdas: Sequence[float], domain: DomainSpec = None,
                      samples: int = 400, growth: float = 2.0) -> ThetaCertificate:
    """Sweep Theta_j over A_j / delta_j for every level and lambda (largest lambda first)"""
    domain = domain or DomainSpec.disk()
    lambdas = sorted((float(v) for v in lambdas), reverse=True)
    required: Dict[int, List[float]] = {j: [] for j in range(1, k + 1)}
    sup_theta: Dict[int, List[float]] = {j: [] for j in range(1, k + 1)}
    for lam in lambdas:
        params = params_for_domain(k, lam, domain)
        decomposition = annulus_decomposition(params, domain.radial_extent)
        for j in range(1, k + 1):
            lo, hi = decomposition.annulus(j)
            start = lo if lo > 0 else hi * 1e-9
            r = np.geomspace(start, hi, samples)
            if lo == 0:
                r = np.concatenate(([0.0], r))
            values = np.abs(theta_values(params, j, r, domain))
            delta_j = math.exp(params.log_delta[j - 1])
            required[j].append(float(np.max(values / (r + lam))))
            sup_theta[j].append(float(np.max(values)))
            logger.debug(f"Theta_{j} k={k} lambda={lam:.1e}: sup={sup_theta[j][-1]:.3e} "
                         f"C={required[j][-1]:.3e} (delta_j={delta_j:.2e})")
    return ThetaCertificate(k, lambdas, required, sup_theta, growth)
