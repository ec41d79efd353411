"""
Green's function of the Dirichlet Laplacian with pole at the origin

    G(x, 0) = -(1/2pi) ln|x| + H(x, 0)

On a disk of radius R everything is closed form (H = (1/2pi) ln R). On a
centrally symmetric rectangle H is the harmonic extension of (1/2pi) ln|x|
from the boundary, computed by second-order finite differences on a grid
whose centre node is the origin; the sparse LU factorization is kept and
reused for every harmonic extension on the same domain.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu

from .core.exceptions import DomainError, HarmonicSolveError, InvalidParameterError, LinearSolveError
from .core.validation import validate_choices, validate_integer, validate_positive
from .utils.constants import DomainKinds, GridDefaults, MeshDefaults

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
BoundaryData = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DomainSpec:
    """Disk of radius R or rectangle [-a, a] x [-b, b], both centred at the pole"""
    kind: str = DomainKinds.DISK
    radius: float = 1.0
    half_width_x: float = 1.0
    half_width_y: float = 1.0
    grid_points: int = GridDefaults.POINTS
    radial_density: float = MeshDefaults.DENSITY

    def __post_init__(self):
        validate_choices('kind', self.kind, DomainKinds.ALL)
        validate_positive('radius', self.radius)
        validate_positive('half_width_x', self.half_width_x)
        validate_positive('half_width_y', self.half_width_y)
        validate_positive('radial_density', self.radial_density)
        validate_integer('grid_points', self.grid_points, min_val=5)
        if self.grid_points % 2 == 0:
            raise InvalidParameterError('grid_points', self.grid_points,
                                        "Must be odd so the origin is a grid node")

    @classmethod
    def disk(cls, radius: float = 1.0, radial_density: float = MeshDefaults.DENSITY) -> 'DomainSpec':
        return cls(DomainKinds.DISK, radius=radius, radial_density=radial_density)

    @classmethod
    def rectangle(cls, a: float = 1.0, b: float = 1.0,
                  grid_points: int = GridDefaults.POINTS) -> 'DomainSpec':
        return cls(DomainKinds.RECTANGLE, half_width_x=a, half_width_y=b, grid_points=grid_points)

    @property
    def is_disk(self) -> bool:
        return self.kind == DomainKinds.DISK

    @property
    def inradius(self) -> float:
        return self.radius if self.is_disk else min(self.half_width_x, self.half_width_y)

    @property
    def radial_extent(self) -> float:
        """End of the radial slice (along the positive x axis)"""
        return self.radius if self.is_disk else self.half_width_x

    @property
    def area(self) -> float:
        if self.is_disk:
            return math.pi * self.radius ** 2
        return 4.0 * self.half_width_x * self.half_width_y

    def contains(self, x: np.ndarray, y: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        if self.is_disk:
            return np.hypot(x, y) <= self.radius * (1.0 + tol)
        return (np.abs(x) <= self.half_width_x * (1.0 + tol)) & \
               (np.abs(y) <= self.half_width_y * (1.0 + tol))

    def require_disk(self, what: str) -> None:
        if not self.is_disk:
            raise DomainError(f"{what} is implemented for the disk only (radial reduction); "
                              f"got {self.kind}")

    def to_dict(self) -> dict:
        if self.is_disk:
            return {"kind": self.kind, "radius": self.radius, "radial_density": self.radial_density}
        return {"kind": self.kind, "a": self.half_width_x, "b": self.half_width_y,
                "grid_points": self.grid_points}

    @classmethod
    def from_dict(cls, data: dict) -> 'DomainSpec':
        kind = data.get("kind", DomainKinds.DISK)
        if kind == DomainKinds.DISK:
            return cls.disk(radius=float(data.get("radius", 1.0)),
                            radial_density=float(data.get("radial_density", MeshDefaults.DENSITY)))
        validate_choices('domain.kind', kind, DomainKinds.ALL)
        return cls.rectangle(a=float(data.get("a", 1.0)), b=float(data.get("b", 1.0)),
                             grid_points=int(data.get("grid_points", GridDefaults.POINTS)))


# ========================================
# FIELDS
# ========================================

@dataclass(frozen=True, eq=False)
class GridField:
    """Values on the tensor grid x (nx) by y (ny); values[j, i] = u(x_i, y_j)"""
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    _interp: Optional[RegularGridInterpolator] = field(default=None, repr=False)

    def at(self, px: np.ndarray, py: np.ndarray) -> np.ndarray:
        interp = self._interp
        if interp is None:
            interp = RegularGridInterpolator((self.y, self.x), self.values, method='linear')
            object.__setattr__(self, '_interp', interp)
        px, py = np.broadcast_arrays(np.asarray(px, dtype=float), np.asarray(py, dtype=float))
        out = interp(np.stack((py.ravel(), px.ravel()), axis=-1)).reshape(px.shape)
        return float(out) if out.ndim == 0 else out

    def evenness_defect(self) -> float:
        """max |u(x) - u(-x)| over the grid"""
        return float(np.max(np.abs(self.values - self.values[::-1, ::-1])))

    def boundary_max(self) -> float:
        v = self.values
        return float(max(np.max(np.abs(v[0])), np.max(np.abs(v[-1])),
                         np.max(np.abs(v[:, 0])), np.max(np.abs(v[:, -1]))))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other: 'GridField') -> 'GridField':
        other_values = other.values if isinstance(other, GridField) else other
        return GridField(self.x, self.y, self.values + other_values)

    def __sub__(self, other: 'GridField') -> 'GridField':
        other_values = other.values if isinstance(other, GridField) else other
        return GridField(self.x, self.y, self.values - other_values)


@dataclass(frozen=True, eq=False)
class PolarField:
    """Values on radii x angles of a disk; values[i, j] = u(r_i, theta_j)"""
    r: np.ndarray
    theta: np.ndarray
    values: np.ndarray


# ========================================
# GREEN DATA
# ========================================

def _points(x) -> Tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(x, dtype=float)
    if arr.shape == () or arr.shape[-1] != 2:
        raise InvalidParameterError('x', x, "Expected a point (x, y) or an array of shape (..., 2)")
    return arr[..., 0], arr[..., 1]


class GreenData:
    """Evaluators for G(x, 0) and H(x, 0) plus the scalar H(0, 0)"""

    def __init__(self, domain: DomainSpec, h00: float):
        self.domain = domain
        self.h00 = float(h00)
        self._logger = logging.getLogger(self.__class__.__name__)

    def _check(self, px: np.ndarray, py: np.ndarray, allow_origin: bool = False) -> None:
        if not np.all(self.domain.contains(px, py)):
            raise DomainError(f"Point outside the {self.domain.kind}")
        if not allow_origin and np.any((px == 0) & (py == 0)):
            raise InvalidParameterError('x', (0.0, 0.0), "G(x, 0) is singular at the pole")

    def regular(self, x) -> Union[float, np.ndarray]:
        raise NotImplementedError

    def green(self, x) -> Union[float, np.ndarray]:
        px, py = _points(x)
        self._check(px, py)
        out = -np.log(np.hypot(px, py)) / TWO_PI + np.asarray(self.regular(x))
        return float(out) if np.ndim(out) == 0 else out

    def extend(self, boundary_data: BoundaryData):
        raise NotImplementedError


class DiskGreen(GreenData):
    """Closed forms on the disk of radius R"""

    THETA_SAMPLES = 256

    def __init__(self, domain: DomainSpec):
        super().__init__(domain, math.log(domain.radius) / TWO_PI)

    def regular(self, x) -> Union[float, np.ndarray]:
        px, py = _points(x)
        self._check(px, py, allow_origin=True)
        out = np.full(px.shape, self.h00)
        return float(out) if out.ndim == 0 else out

    def extend(self, boundary_data: BoundaryData, radii: np.ndarray = None) -> PolarField:
        """Fourier series: mode m decays like (r/R)^|m| toward the centre"""
        big_r = self.domain.radius
        n = self.THETA_SAMPLES
        theta = TWO_PI * np.arange(n) / n
        samples = np.asarray(boundary_data(big_r * np.cos(theta), big_r * np.sin(theta)), dtype=float)
        samples = np.broadcast_to(samples, theta.shape).astype(float)
        if radii is None:
            radii = np.linspace(0.0, big_r, 65)
        radii = np.asarray(radii, dtype=float)
        coeffs = np.fft.rfft(samples)
        m = np.arange(coeffs.size)
        scale = (radii[:, None] / big_r) ** m[None, :]
        values = np.fft.irfft(coeffs[None, :] * scale, n=n, axis=1)
        return PolarField(radii, theta, values)


class RectangleGreen(GreenData):
    """Five-point Laplacian on [-a, a] x [-b, b] with a cached LU factorization"""

    def __init__(self, domain: DomainSpec):
        n = domain.grid_points
        self.x = np.linspace(-domain.half_width_x, domain.half_width_x, n)
        self.y = np.linspace(-domain.half_width_y, domain.half_width_y, n)
        self.hx = self.x[1] - self.x[0]
        self.hy = self.y[1] - self.y[0]
        self._matrix = self._assemble(n - 2, self.hx, self.hy)
        try:
            self._lu = splu(self._matrix)
        except RuntimeError as e:
            raise LinearSolveError(f"Laplacian factorization failed: {e}")
        self._xx, self._yy = np.meshgrid(self.x, self.y)
        h_field = self.extend(lambda px, py: self._log_radius(px, py) / TWO_PI)
        self.h_field = h_field
        centre = n // 2
        super().__init__(domain, h_field.values[centre, centre])
        self._logger.info(f"🧮 Rectangle Green's function on {n}x{n} grid, "
                          f"H(0,0) = {self.h00:.10f}")

    @staticmethod
    def _log_radius(px, py):
        with np.errstate(divide='ignore'):
            return np.log(np.hypot(px, py))

    @staticmethod
    def _assemble(m: int, hx: float, hy: float) -> sp.csc_matrix:
        def second_difference(size, h):
            return sp.diags([-np.ones(size - 1), 2.0 * np.ones(size), -np.ones(size - 1)],
                            [-1, 0, 1]) / h ** 2

        eye = sp.identity(m)
        return (sp.kron(eye, second_difference(m, hx)) +
                sp.kron(second_difference(m, hy), eye)).tocsc()

    def regular(self, x) -> Union[float, np.ndarray]:
        px, py = _points(x)
        self._check(px, py, allow_origin=True)
        return self.h_field.at(px, py)

    def extend(self, boundary_data: BoundaryData) -> GridField:
        xx, yy = np.meshgrid(self.x, self.y)
        grid = np.zeros_like(xx)
        border = np.ones_like(xx, dtype=bool)
        border[1:-1, 1:-1] = False
        grid[border] = np.asarray(boundary_data(xx[border], yy[border]), dtype=float)
        if not np.all(np.isfinite(grid[border])):
            raise InvalidParameterError('boundary_data', '<callable>', "Must be finite on the boundary")
        rhs = (grid[1:-1, :-2] + grid[1:-1, 2:]) / self.hx ** 2 + \
              (grid[:-2, 1:-1] + grid[2:, 1:-1]) / self.hy ** 2
        rhs = rhs.ravel()
        interior = self._lu.solve(rhs)
        scale = max(1.0, float(np.max(np.abs(rhs))))
        residual = float(np.max(np.abs(self._matrix @ interior - rhs))) / scale
        if not np.isfinite(residual) or residual > 1e-8:
            raise HarmonicSolveError("Discrete Laplace solve inaccurate", residual=residual)
        grid[1:-1, 1:-1] = interior.reshape(grid.shape[0] - 2, grid.shape[1] - 2)
        return GridField(self.x, self.y, grid)


@lru_cache(maxsize=8)
def green_data(domain: DomainSpec) -> GreenData:
    """Cached GreenData per domain (read-only after construction)"""
    if domain.is_disk:
        return DiskGreen(domain)
    return RectangleGreen(domain)


# ========================================
# OPERATIONS
# ========================================

def green_origin(domain: DomainSpec, x) -> Union[float, np.ndarray]:
    """G(x, 0) for x in the domain, x != 0"""
    data = green_data(domain)
    if domain.is_disk:
        px, py = _points(x)
        data._check(px, py)
        out = -np.log(np.hypot(px, py) / domain.radius) / TWO_PI
        return float(out) if np.ndim(out) == 0 else out
    return data.green(x)


def robin_at_origin(domain: DomainSpec, extrapolate: bool = True) -> float:
    """
    H(0, 0). On a rectangle the grid value is Richardson-extrapolated against
    the half-resolution grid when the node count allows nested grids.
    """
    fine = green_data(domain).h00
    if domain.is_disk or not extrapolate:
        return fine
    n = domain.grid_points
    if (n - 1) % 4 != 0:
        logger.warning(f"grid_points={n}: no nested coarse grid, returning the raw grid value")
        return fine
    coarse_domain = DomainSpec.rectangle(domain.half_width_x, domain.half_width_y, (n + 1) // 2)
    coarse = green_data(coarse_domain).h00
    return fine + (fine - coarse) / 3.0


def image_series_robin(a: float, b: float, terms: int = GridDefaults.IMAGE_TERMS) -> float:
    """
    H(0, 0) on [-a, a] x [-b, b] from the strip Green's function
    -(1/2pi) ln|tan(pi z / 4a)| and alternating images spaced 2b apart in y.
    """
    validate_positive('a', a)
    validate_positive('b', b)
    n = np.arange(1, terms + 1)
    series = np.sum((-1.0) ** n * np.log(np.tanh(math.pi * n * b / (2.0 * a))))
    return -(math.log(math.pi / (4.0 * a)) + 2.0 * series) / TWO_PI


def harmonic_extension(domain: DomainSpec, boundary_data: BoundaryData,
                       even_tol: float = 1e-10) -> Union[GridField, PolarField]:
    """Discrete harmonic function with the given (even) boundary values"""
    if domain.is_disk:
        theta = np.linspace(0.0, TWO_PI, 97)
        bx, by = domain.radius * np.cos(theta), domain.radius * np.sin(theta)
    else:
        bx = np.concatenate((np.linspace(-domain.half_width_x, domain.half_width_x, 49),
                             np.full(49, domain.half_width_x)))
        by = np.concatenate((np.full(49, domain.half_width_y),
                             np.linspace(-domain.half_width_y, domain.half_width_y, 49)))
    forward = np.broadcast_to(np.asarray(boundary_data(bx, by), dtype=float), bx.shape)
    backward = np.broadcast_to(np.asarray(boundary_data(-bx, -by), dtype=float), bx.shape)
    if not (np.all(np.isfinite(forward)) and np.all(np.isfinite(backward))):
        raise InvalidParameterError('boundary_data', '<callable>', "Must be finite")
    if np.max(np.abs(forward - backward)) > even_tol * max(1.0, float(np.max(np.abs(forward)))):
        raise InvalidParameterError('boundary_data', '<callable>', "Must be even under x -> -x")
    return green_data(domain).extend(boundary_data)


def green_profile_csv(domain: DomainSpec, radii) -> str:
    """CSV of (r, G, H) along the positive x axis"""
    radii = np.asarray(radii, dtype=float)
    pts = np.stack((radii, np.zeros_like(radii)), axis=-1)
    g = np.atleast_1d(green_origin(domain, pts))
    h = np.atleast_1d(green_data(domain).regular(pts))
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["r", "G", "H"])
    for row in zip(radii, g, h):
        writer.writerow([f"{v:.12g}" for v in row])
    return buffer.getvalue()
