"""
Singular Liouville profiles and their linearization kernel

    w(r) = ln( 2 alpha^2 delta^alpha / (delta^alpha + r^alpha)^2 )

solves -Laplace(w) = r^(alpha-2) e^w in the plane. This module evaluates the
profiles in log-space, exposes the three kernel functions of the linearized
equation, and checks every integral identity by quadrature in the variable
t = r^alpha / (1 + r^alpha), which maps both algebraic tails onto (0, 1).

Example:
    ```python
    from towerlab.limit_profiles import Profile, bubble_value, limit_mass

    p = Profile.from_delta(6, 1e-2)
    bubble_value(p, 1.0)      # ln(72e-12) - 2 ln(1 + 1e-12)
    limit_mass(6)             # 24 pi
    ```
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Tuple, Union

import numpy as np
from scipy.special import roots_legendre

from .core.exceptions import InvalidParameterError, QuadratureError, ResolutionError
from .core.mesh import RadialMesh
from .core.validation import validate_finite
from .utils.constants import MeshDefaults, QuadratureDefaults

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


# ========================================
# PROFILES
# ========================================

@dataclass(frozen=True)
class Profile:
    """Bubble w^alpha_delta, stored through ln(delta)"""
    alpha: float
    log_delta: float = 0.0

    def __post_init__(self):
        validate_finite('alpha', self.alpha)
        validate_finite('log_delta', self.log_delta)
        if self.alpha < 2:
            raise InvalidParameterError('alpha', self.alpha, "Must be >= 2")

    @classmethod
    def from_delta(cls, alpha: float, delta: float) -> 'Profile':
        if not (delta > 0 and math.isfinite(delta)):
            raise InvalidParameterError('delta', delta, "Must be a finite positive number")
        return cls(float(alpha), math.log(delta))

    @property
    def delta(self) -> float:
        return math.exp(self.log_delta)


def _as_radius(r: ArrayLike) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise InvalidParameterError('r', r if r.ndim == 0 else "<array>", "Must be finite")
    if np.any(r < 0):
        raise InvalidParameterError('r', r if r.ndim == 0 else "<array>", "Must be >= 0")
    return r


def _log(r: np.ndarray) -> np.ndarray:
    with np.errstate(divide='ignore'):
        return np.log(r)


def _out(values: np.ndarray) -> ArrayLike:
    return float(values) if np.ndim(values) == 0 else values


def log_bubble_terms(alpha: float, log_delta: float, log_r: np.ndarray) -> np.ndarray:
    """w as a function of ln r; safe for ln r = -inf"""
    a_ld = alpha * log_delta
    return math.log(2.0 * alpha * alpha) + a_ld - 2.0 * np.logaddexp(a_ld, alpha * log_r)


def bubble_value(profile: Profile, r: ArrayLike) -> ArrayLike:
    """w^alpha_delta(r) without forming delta^alpha"""
    r = _as_radius(r)
    return _out(log_bubble_terms(profile.alpha, profile.log_delta, _log(r)))


def log_bubble_density(profile: Profile, r: ArrayLike) -> ArrayLike:
    """ln( r^(alpha-2) e^w ); -inf at r = 0 when alpha > 2"""
    r = _as_radius(r)
    log_r = _log(r)
    w = log_bubble_terms(profile.alpha, profile.log_delta, log_r)
    if profile.alpha == 2:
        return _out(w)
    return _out((profile.alpha - 2.0) * log_r + w)


def bubble_density(profile: Profile, r: ArrayLike) -> ArrayLike:
    """r^(alpha-2) e^w, i.e. -Laplace(w), also the potential of the linearized operator"""
    return _out(np.exp(log_bubble_density(profile, r)))


# ========================================
# KERNEL
# ========================================

@dataclass(frozen=True)
class KernelBasis:
    """
    Bounded solutions of -Laplace(phi) = 2 alpha^2 r^(alpha-2) (1+r^alpha)^-2 phi:

        Z0   = (1 - r^alpha) / (1 + r^alpha)
        phi1 = r^(alpha/2) cos(alpha theta / 2) / (1 + r^alpha)
        phi2 = r^(alpha/2) sin(alpha theta / 2) / (1 + r^alpha)
    """
    alpha: float

    MEMBERS = ("z0", "phi1", "phi2")

    def z0(self, r: ArrayLike) -> ArrayLike:
        return _out(-np.tanh(0.5 * self.alpha * _log(_as_radius(r))))

    def _envelope(self, r: ArrayLike) -> np.ndarray:
        # r^(a/2) / (1 + r^a) = 1 / (2 cosh(a ln r / 2))
        with np.errstate(over='ignore'):
            return 0.5 / np.cosh(0.5 * self.alpha * _log(_as_radius(r)))

    def phi1(self, r: ArrayLike, theta: ArrayLike) -> ArrayLike:
        return _out(self._envelope(r) * np.cos(0.5 * self.alpha * np.asarray(theta, dtype=float)))

    def phi2(self, r: ArrayLike, theta: ArrayLike) -> ArrayLike:
        return _out(self._envelope(r) * np.sin(0.5 * self.alpha * np.asarray(theta, dtype=float)))

    def cartesian(self, x: ArrayLike, y: ArrayLike) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = np.hypot(x, y)
        theta = np.arctan2(y, x)
        return self.z0(r), self.phi1(r, theta), self.phi2(r, theta)

    def potential(self, r: ArrayLike) -> ArrayLike:
        return bubble_density(Profile(self.alpha, 0.0), r)


def kernel_basis(alpha: float) -> KernelBasis:
    if alpha < 2:
        raise InvalidParameterError('alpha', alpha, "Must be >= 2")
    return KernelBasis(float(alpha))


@dataclass(frozen=True)
class WeightedNormSpec:
    """Weight r^((alpha-2)/2) / (1 + r^alpha) of the space L_alpha"""
    alpha: float

    def weight(self, r: ArrayLike) -> ArrayLike:
        log_r = _log(_as_radius(r))
        with np.errstate(invalid='ignore'):
            log_w = 0.5 * (self.alpha - 2.0) * log_r - np.logaddexp(0.0, self.alpha * log_r)
        if self.alpha == 2:
            log_w = -np.logaddexp(0.0, self.alpha * log_r)
        return _out(np.exp(log_w))


# ========================================
# QUADRATURE
# ========================================

@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    levels: int


@lru_cache(maxsize=64)
def _graded_rule(levels: int, order: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gauss-Legendre on panels [2^-(j+1), 2^-j] toward both ends of (0, 1).

    Returns (t, 1 - t, weights) with 1 - t computed directly on the right
    half so it keeps full relative precision near t = 1.
    """
    x, w = roots_legendre(order)
    edges = [2.0 ** -j for j in range(1, levels + 1)][::-1]
    edges = [0.0] + edges
    near, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        near.append(a + 0.5 * (b - a) * (x + 1.0))
        weights.append(0.5 * (b - a) * w)
    near = np.concatenate(near)
    weights = np.concatenate(weights)
    t = np.concatenate((near, 1.0 - near))
    omt = np.concatenate((1.0 - near, near))
    wts = np.concatenate((weights, weights))
    for arr in (t, omt, wts):
        arr.setflags(write=False)
    return t, omt, wts


def unit_interval_integral(g: Callable[[np.ndarray, np.ndarray], np.ndarray],
                           order: int = QuadratureDefaults.ORDER,
                           rtol: float = QuadratureDefaults.RTOL) -> QuadratureResult:
    """Integral of g(t, 1 - t) over (0, 1), adding panels until it settles"""
    previous = None
    for levels in range(QuadratureDefaults.MIN_LEVELS, QuadratureDefaults.MAX_LEVELS + 1):
        t, omt, wts = _graded_rule(levels, order)
        with np.errstate(over='ignore', invalid='ignore', divide='ignore'):
            values = np.asarray(g(t, omt), dtype=float)
        if not np.all(np.isfinite(values)):
            raise QuadratureError("Integrand is not finite on the quadrature nodes")
        value = float(np.dot(wts, values))
        if previous is not None:
            change = abs(value - previous)
            if change < rtol * max(1.0, abs(value)):
                logger.debug(f"Quadrature settled at {levels} levels (change {change:.2e})")
                return QuadratureResult(value, change, levels)
        previous = value
    raise QuadratureError(f"No convergence after {QuadratureDefaults.MAX_LEVELS} levels",
                          estimate=abs(value - previous) if previous is not None else None)


def plane_integral(integrand: Callable[[np.ndarray], np.ndarray], alpha: float = 2.0,
                   order: int = QuadratureDefaults.ORDER,
                   rtol: float = QuadratureDefaults.RTOL) -> QuadratureResult:
    """
    Integral over R^2 of a radial function F(|x|).

    With r^alpha = t / (1 - t):  2 pi F(r) r dr = 2 pi F(r) r^2 / (alpha t (1 - t)) dt.
    """
    if alpha <= 0:
        raise InvalidParameterError('alpha', alpha, "Must be positive")

    def g(t, omt):
        log_r = (np.log(t) - np.log(omt)) / alpha
        r = np.exp(log_r)
        return 2.0 * math.pi * integrand(r) * r * r / (alpha * t * omt)

    return unit_interval_integral(g, order=order, rtol=rtol)


def _profile_weight(alpha: float, r: np.ndarray) -> np.ndarray:
    """2 alpha^2 r^(alpha-2) / (1 + r^alpha)^2"""
    return bubble_density(Profile(alpha, 0.0), r)


def limit_mass(alpha: float) -> float:
    """Integral of |y|^(alpha-2) e^w over the plane; equals 4 pi alpha"""
    if not alpha >= 2:
        raise InvalidParameterError('alpha', alpha, "Must be >= 2")
    result = plane_integral(lambda r: _profile_weight(alpha, r), alpha)
    logger.debug(f"limit_mass({alpha}) = {result.value:.15g} (+/- {result.error_estimate:.1e})")
    return result.value


def kernel_integrals(alpha: float) -> Tuple[float, float, float]:
    """
    Weighted moments of Z0 against 1, ln((1 + r^alpha)^2) and ln r.

    Exact values are 0, -4 pi alpha and -4 pi.
    """
    if not alpha >= 2:
        raise InvalidParameterError('alpha', alpha, "Must be >= 2")
    basis = kernel_basis(alpha)

    def weighted_z0(r):
        return _profile_weight(alpha, r) * basis.z0(r)

    i1 = plane_integral(weighted_z0, alpha).value
    i2 = plane_integral(lambda r: weighted_z0(r) * 2.0 * np.logaddexp(0.0, alpha * np.log(r)),
                        alpha).value
    i3 = plane_integral(lambda r: weighted_z0(r) * np.log(r), alpha).value
    return i1, i2, i3


def weighted_norms(alpha: float, u: Callable, du: Callable) -> Tuple[float, float]:
    """(||u||_{L_alpha}, ||grad u||_{L^2}) for a radial u with derivative du"""
    spec = WeightedNormSpec(float(alpha))
    l_alpha = plane_integral(lambda r: (spec.weight(r) * u(r)) ** 2, alpha).value
    grad = plane_integral(lambda r: du(r) ** 2, alpha).value
    return math.sqrt(l_alpha), math.sqrt(grad)


def stereographic_norm_ratio(alpha: float, test_function: Callable) -> float:
    """
    ||T u||^2_{L_2} / ||u||^2_{L_alpha} for the radial substitution
    (T u)(s) = u(s^(2/alpha)); the value is alpha / 2 for every radial u.
    """
    if not alpha >= 2:
        raise InvalidParameterError('alpha', alpha, "Must be >= 2")
    spec = WeightedNormSpec(float(alpha))
    unit = WeightedNormSpec(2.0)
    try:
        original = plane_integral(lambda r: (spec.weight(r) * test_function(r)) ** 2, alpha).value
        transformed = plane_integral(
            lambda s: (unit.weight(s) * test_function(s ** (2.0 / alpha))) ** 2, 2.0).value
    except QuadratureError as e:
        raise InvalidParameterError('test_function', test_function, f"Not integrable: {e}")
    if not (original > 0 and math.isfinite(original)):
        raise InvalidParameterError('test_function', test_function, "Zero or infinite L_alpha norm")
    return transformed / original


@dataclass(frozen=True)
class GradientBounds:
    lower: float
    value: float
    upper: float

    def holds(self, rtol: float = 1e-9) -> bool:
        slack = rtol * max(1.0, abs(self.value))
        return self.lower - slack <= self.value <= self.upper + slack


def stereographic_gradient_bounds(alpha: float, derivative: Callable) -> GradientBounds:
    """(2/alpha)||grad T u||^2 <= ||grad u||^2 <= (alpha/2)||grad T u||^2"""
    grad_u = plane_integral(lambda r: derivative(r) ** 2, alpha).value

    def transformed_derivative(s):
        return derivative(s ** (2.0 / alpha)) * (2.0 / alpha) * s ** (2.0 / alpha - 1.0)

    grad_tu = plane_integral(lambda s: transformed_derivative(s) ** 2, 2.0).value
    return GradientBounds(lower=(2.0 / alpha) * grad_tu, value=grad_u,
                          upper=(alpha / 2.0) * grad_tu)


# ========================================
# DISCRETE CHECKS
# ========================================

def _check_mesh(mesh: RadialMesh, log_delta: float = None) -> None:
    mesh.require_resolution(MeshDefaults.MIN_NODES_PER_DECADE, "limit-profile mesh")
    if log_delta is not None and not (mesh.s_min < log_delta < mesh.s_max):
        raise ResolutionError(f"Mesh [{mesh.r[0]:.2e}, {mesh.r[-1]:.2e}] does not contain "
                              f"the scale delta={math.exp(log_delta):.2e}")


def _discrete_laplacian(mesh: RadialMesh, values: np.ndarray) -> np.ndarray:
    """Second-order -Laplace in s = ln r at interior nodes"""
    second = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / mesh.h ** 2
    return -second / mesh.r[1:-1] ** 2


def verify_limit_pde(profile: Profile, mesh: RadialMesh) -> float:
    """Max relative residual of -Laplace_h(w) = r^(alpha-2) e^w at interior nodes"""
    _check_mesh(mesh, profile.log_delta)
    w = log_bubble_terms(profile.alpha, profile.log_delta, mesh.s)
    source = bubble_density(profile, mesh.r)[1:-1]
    residual = np.abs(_discrete_laplacian(mesh, w) - source) / source
    worst = float(np.max(residual))
    logger.debug(f"limit PDE residual {worst:.3e} on {mesh}")
    return worst


def verify_kernel_pde(alpha: float, mesh: RadialMesh) -> float:
    """Max residual of -Laplace_h(Z0) - V Z0, relative to max |V Z0|"""
    _check_mesh(mesh, 0.0)
    basis = kernel_basis(alpha)
    z0 = basis.z0(mesh.r)
    vz = basis.potential(mesh.r)[1:-1] * z0[1:-1]
    residual = _discrete_laplacian(mesh, z0) - vz
    return float(np.max(np.abs(residual)) / np.max(np.abs(vz)))
