"""
Linearized operator L = -Laplace - V around the tower

V = sum_i r^(alpha_i - 2) e^(w_i) is radial, so L splits into Fourier modes
m. On the log mesh the mode-m quadratic forms are

    energy  phi^T K phi = sum (phi_{i+1} - phi_i)^2 / h + m^2 sum w_i phi_i^2 + m phi_0^2
    mass    M_i = w_i r_i^2   (+ r_0^2 / (2m + 2) for the disc r < r_0)

with phi = 0 on the last node. The even sector (phi(x) = phi(-x)) is the set
of even m. sigma_min is the eigenvalue of the pencil (K - diag(M V), K)
closest to zero, which is invariant under rescaling of the tower.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh, splu
from scipy.special import expit

from .core.exceptions import InvalidParameterError, LinearSolveError, ResolutionError
from .core.mesh import RadialField, RadialMesh
from .core.validation import validate_integer
from .greens import DomainSpec, GridField, green_data
from .limit_profiles import Profile, bubble_density, kernel_basis
from .tower import BubbleParams, default_mesh, params_for_domain
from .utils.constants import EigenDefaults, MeshDefaults

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Mode-m reduction of L on a radial mesh (unknowns at nodes 0..N-1)"""
    mesh: RadialMesh
    mode: int
    symmetric_sector: bool
    stiffness: sp.csc_matrix
    mass: np.ndarray
    potential: np.ndarray
    matrix: sp.csc_matrix

    @property
    def size(self) -> int:
        return self.mass.size

    def is_symmetric(self) -> bool:
        diff = (self.matrix - self.matrix.T).tocoo()
        return diff.nnz == 0 or bool(np.all(diff.data == 0.0))

    @cached_property
    def lu(self):
        """Sparse LU of the matrix, checked for numerical singularity"""
        try:
            factor = splu(self.matrix)
        except RuntimeError as e:
            raise LinearSolveError(f"Factorization of mode {self.mode} failed: {e}",
                                   condition_estimate=math.inf)
        pivots = np.abs(factor.U.diagonal())
        smallest = float(np.min(pivots))
        ratio = math.inf if smallest == 0.0 else float(np.max(pivots)) / smallest
        if ratio > 1e14:
            raise LinearSolveError(f"Mode {self.mode} operator is numerically singular",
                                   condition_estimate=ratio)
        return factor

    def energy(self, values: np.ndarray) -> float:
        """2 pi phi^T K phi (the Dirichlet integral for m = 0)"""
        v = np.asarray(values, dtype=float)[:self.size]
        return 2.0 * math.pi * float(v @ (self.stiffness @ v))

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Weak form of L phi at the unknown nodes"""
        v = np.asarray(values, dtype=float)[:self.size]
        return self.matrix @ v


def mode_forms(mesh: RadialMesh, mode: int) -> Tuple[sp.csc_matrix, np.ndarray]:
    n = mesh.size - 1
    h = mesh.h
    w = mesh.weights[:n]
    main = np.full(n, 2.0 / h)
    main[0] = 1.0 / h
    main += mode * mode * w
    main[0] += mode
    off = np.full(n - 1, -1.0 / h)
    stiffness = sp.diags([off, main, off], [-1, 0, 1], format='csc')
    mass = w * mesh.r[:n] ** 2
    mass[0] += mesh.r[0] ** 2 / (2.0 * mode + 2.0)
    return stiffness, mass


def operator_from_potential(mesh: RadialMesh, mode: int, potential: np.ndarray,
                            symmetric_sector: bool = False) -> DiscreteOperator:
    """K - diag(M V) for a potential sampled at every mesh node"""
    validate_integer('mode', mode, min_val=0)
    potential = np.asarray(potential, dtype=float)
    if potential.shape != mesh.s.shape:
        raise InvalidParameterError('potential', potential.shape, f"Expected {mesh.s.shape}")
    stiffness, mass = mode_forms(mesh, mode)
    v = potential[:-1]
    matrix = (stiffness - sp.diags(mass * v, 0, format='csc')).tocsc()
    return DiscreteOperator(mesh, mode, symmetric_sector, stiffness, mass, v, matrix)


def tower_potential(params: BubbleParams, r: np.ndarray) -> np.ndarray:
    return sum(bubble_density(Profile(a, ld), r) for a, ld in zip(params.alpha, params.log_delta))


def build_operator(params: BubbleParams, mesh: RadialMesh, mode: int,
                   symmetric: bool = True, m_max: int = None) -> DiscreteOperator:
    """
    Banded discretization of -phi'' - phi'/r + (m^2/r^2) phi - V phi.

    In the even sector only even m are admitted; m_max defaults to 2 alpha_k.
    """
    validate_integer('mode', mode, min_val=0)
    m_max = 2 * params.alpha[-1] if m_max is None else m_max
    if mode > m_max:
        raise InvalidParameterError('mode', mode, f"Must be <= m_max={m_max}")
    if symmetric and mode % 2 == 1:
        raise InvalidParameterError('mode', mode, "Odd modes are excluded in the even sector")
    mesh.require_resolution(MeshDefaults.ANSATZ_NODES_PER_DECADE, "operator mesh")
    if mesh.s_min > params.log_delta[0]:
        raise ResolutionError(f"Mesh starts at r={mesh.r[0]:.3e}, above delta_1")
    return operator_from_potential(mesh, mode, tower_potential(params, mesh.r), symmetric)


def build_limit_operator(alpha: float, mesh: RadialMesh, mode: int) -> DiscreteOperator:
    """Single profile at delta = 1 on the truncated disk r < exp(s_max); all modes admitted"""
    potential = kernel_basis(alpha).potential(mesh.r)
    return operator_from_potential(mesh, mode, potential, symmetric_sector=False)


# ========================================
# SOLVES
# ========================================

@dataclass
class LinearSolution:
    phi: RadialField
    energy_norm: float


def solve(operator: DiscreteOperator, h: Union[RadialField, np.ndarray]) -> LinearSolution:
    """phi with L phi = h (weakly), phi = 0 on the boundary"""
    values = h.values if isinstance(h, RadialField) else np.asarray(h, dtype=float)
    if values.shape != operator.mesh.s.shape:
        raise InvalidParameterError('h', values.shape, f"Expected {operator.mesh.s.shape}")
    if not np.all(np.isfinite(values)):
        raise InvalidParameterError('h', '<field>', "Must be finite")
    phi = operator.lu.solve(operator.mass * values[:-1])
    full = np.append(phi, 0.0)
    energy = operator.energy(phi)
    return LinearSolution(RadialField(operator.mesh, full), math.sqrt(max(energy, 0.0)))


def smallest_eigenpair(operator: DiscreteOperator, tol: float = EigenDefaults.TOL,
                       maxiter: int = EigenDefaults.MAX_ITER) -> Tuple[float, np.ndarray]:
    """Eigenvalue of (A, K) nearest zero via shift-invert Lanczos at sigma = 0"""
    v0 = np.ones(operator.size)
    try:
        values, vectors = eigsh(operator.matrix, k=1, M=operator.stiffness, sigma=0.0,
                                which='LM', tol=tol, maxiter=maxiter, v0=v0)
    except ArpackNoConvergence as e:
        if len(e.eigenvalues):
            logger.warning(f"eigsh: partial convergence for mode {operator.mode}")
            return float(e.eigenvalues[0]), e.eigenvectors[:, 0]
        raise LinearSolveError(f"No eigenvalue converged for mode {operator.mode}")
    except ArpackError as e:
        raise LinearSolveError(f"eigsh failed for mode {operator.mode}: {e}")
    except RuntimeError as e:
        if "singular" not in str(e).lower():
            raise LinearSolveError(f"eigsh failed for mode {operator.mode}: {e}")
        # shift-invert factor at sigma = 0 is exactly singular: zero is an eigenvalue
        logger.warning(f"eigsh: singular shift-invert factor for mode {operator.mode}, sigma_min = 0")
        return 0.0, np.zeros(operator.size)
    return float(values[0]), vectors[:, 0]


def min_singular_value(operator: DiscreteOperator) -> float:
    return abs(smallest_eigenpair(operator)[0])


def kernel_overlap(alpha: float, vector: np.ndarray, mesh: RadialMesh) -> float:
    """Correlation of a nodal vector with Z0 in the V-weighted inner product"""
    n = mesh.size - 1
    vector = np.asarray(vector, dtype=float)[:n]
    _, mass = mode_forms(mesh, 0)
    basis = kernel_basis(alpha)
    weight = mass * basis.potential(mesh.r[:n])
    z0 = basis.z0(mesh.r[:n])
    num = float(np.sum(weight * vector * z0))
    den = math.sqrt(float(np.sum(weight * vector ** 2)) * float(np.sum(weight * z0 ** 2)))
    return abs(num) / den if den > 0 else 0.0


@dataclass
class SpectrumPoint:
    lam: float
    mode: int
    sigma_min: float

    @property
    def scaled(self) -> float:
        """sigma_min |ln lambda|"""
        return self.sigma_min * abs(math.log(self.lam))


@dataclass
class SpectrumSweep:
    k: int
    symmetric: bool
    points: List[SpectrumPoint] = field(default_factory=list)
    band: float = EigenDefaults.BAND

    def sigma_by_lambda(self) -> Dict[float, float]:
        out: Dict[float, float] = {}
        for pt in self.points:
            out[pt.lam] = min(out.get(pt.lam, math.inf), pt.sigma_min)
        return out

    def band_ratio(self) -> float:
        """max / min over lambda of sigma_min |ln lambda|"""
        scaled = [s * abs(math.log(lam)) for lam, s in self.sigma_by_lambda().items()]
        if not scaled or min(scaled) <= 0:
            return math.inf
        return max(scaled) / min(scaled)

    @property
    def passed(self) -> bool:
        return self.band_ratio() <= self.band

    def rows(self) -> List[dict]:
        return [{"lambda": p.lam, "mode": p.mode, "sigma_min": p.sigma_min,
                 "sigma_min_log": p.scaled} for p in self.points]


def default_modes(params: BubbleParams, symmetric: bool) -> List[int]:
    m_max = 2 * params.alpha[-1]
    step = 2 if symmetric else 1
    return list(range(0, m_max + 1, step))


def spectrum_at(k: int, lam: float, modes: Sequence[int] = None, symmetric: bool = True,
                domain: DomainSpec = None, density: float = None) -> List[SpectrumPoint]:
    """sigma_min per mode at one lambda"""
    domain = domain or DomainSpec.disk()
    domain.require_disk("linear spectrum")
    params = params_for_domain(k, lam, domain)
    mesh = default_mesh(params, domain, density)
    modes = default_modes(params, symmetric) if modes is None else list(modes)
    points = []
    for m in modes:
        operator = build_operator(params, mesh, m, symmetric=symmetric)
        sigma = min_singular_value(operator)
        logger.debug(f"k={k} lambda={lam:.1e} mode={m}: sigma_min={sigma:.4e}")
        points.append(SpectrumPoint(lam, m, sigma))
    return points


def min_singular_sweep(k: int, lambdas: Sequence[float], modes: Sequence[int] = None,
                       symmetric: bool = True, domain: DomainSpec = None,
                       density: float = None, band: float = EigenDefaults.BAND) -> SpectrumSweep:
    """sigma_min along a lambda sweep; the even sector keeps sigma_min |ln lambda| in a band"""
    sweep = SpectrumSweep(k, symmetric, band=band)
    for lam in sorted((float(v) for v in lambdas), reverse=True):
        sweep.points.extend(spectrum_at(k, lam, modes, symmetric, domain, density))
    logger.info(f"🔬 k={k} {'even' if symmetric else 'full'} sector: band ratio "
                f"{sweep.band_ratio():.3f}")
    return sweep


@dataclass
class SectorFloor:
    """sigma_min at one lambda on the default mesh and on a mesh `factor` times denser"""
    lam: float
    density: float
    factor: float
    sigma_min: float
    sigma_min_refined: float

    @property
    def refinement_ratio(self) -> float:
        """sigma_min(refined) / sigma_min; far from 1 when sigma_min sits at the mesh floor"""
        return math.inf if self.sigma_min == 0.0 else self.sigma_min_refined / self.sigma_min

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "density": self.density, "factor": self.factor,
                "sigma_min": self.sigma_min, "sigma_min_refined": self.sigma_min_refined,
                "refinement_ratio": self.refinement_ratio}


def discretization_floor(k: int, lam: float, modes: Sequence[int] = None, symmetric: bool = False,
                         domain: DomainSpec = None, density: float = None,
                         factor: float = 2.0) -> SectorFloor:
    """Recompute sigma_min on a refined mesh to tell a resolved value from the discretization floor"""
    domain = domain or DomainSpec.disk()
    density = density or domain.radial_density
    coarse = min(p.sigma_min for p in spectrum_at(k, lam, modes, symmetric, domain, density))
    fine = min(p.sigma_min for p in spectrum_at(k, lam, modes, symmetric, domain, factor * density))
    floor = SectorFloor(lam, density, factor, coarse, fine)
    logger.info(f"🔬 k={k} lambda={lam:.1e} {'even' if symmetric else 'full'} sector: "
                f"sigma_min {coarse:.3e} -> {fine:.3e} under {factor:g}x refinement")
    return floor


# ========================================
# PROJECTED KERNEL
# ========================================

@dataclass(frozen=True, eq=False)
class ZProjection:
    """P Z for Z = (delta^a - r^a) / (delta^a + r^a) against 2 delta^a / (delta^a + r^a)"""
    alpha: float
    log_delta: float
    field: Union[RadialField, GridField]
    target: Union[RadialField, GridField]
    gap: float

    @property
    def constant(self) -> float:
        """gap / delta^alpha"""
        return self.gap / math.exp(self.alpha * self.log_delta)

    def at(self, r: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        if isinstance(self.field, RadialField):
            return self.field.at(r)
        r = np.asarray(r, dtype=float)
        return self.field.at(r, np.zeros_like(r))


def _scaled_log(log_r: np.ndarray, alpha: float, log_delta: float) -> np.ndarray:
    return alpha * (log_r - log_delta)


def z_projection_check(alpha: float, log_delta: float, domain: DomainSpec = None,
                       mesh: RadialMesh = None) -> ZProjection:
    """Harmonic correction of Z and its sup distance to the closed-form target"""
    domain = domain or DomainSpec.disk()
    if log_delta >= math.log(domain.inradius):
        raise InvalidParameterError('delta', math.exp(log_delta), "Must be below the inradius")
    if domain.is_disk:
        mesh = mesh or RadialMesh.for_scales(log_delta, domain.radius, domain.radial_density)
        x = _scaled_log(mesh.s, alpha, log_delta)
        z = -np.tanh(0.5 * x)
        z_boundary = -math.tanh(0.5 * alpha * (math.log(domain.radius) - log_delta))
        pz = z - z_boundary
        target = 2.0 * expit(-x)
        gap = float(np.max(np.abs(pz - target)))
        return ZProjection(alpha, log_delta, RadialField(mesh, pz), RadialField(mesh, target), gap)

    data = green_data(domain)
    xx, yy = np.meshgrid(data.x, data.y)
    with np.errstate(divide='ignore'):
        x = _scaled_log(np.log(np.hypot(xx, yy)), alpha, log_delta)
    z = -np.tanh(0.5 * x)

    def minus_z(px, py):
        with np.errstate(divide='ignore'):
            return np.tanh(0.5 * _scaled_log(np.log(np.hypot(px, py)), alpha, log_delta))

    correction = data.extend(minus_z)
    pz = GridField(data.x, data.y, z + correction.values)
    target = GridField(data.x, data.y, 2.0 * expit(-x))
    gap = float(np.max(np.abs(pz.values - target.values)))
    return ZProjection(alpha, log_delta, pz, target, gap)
