"""
Graded log-radial mesh

Nodes are uniform in s = ln r, so every bubble, whatever its scale, occupies
the same number of nodes. Integrals of radial functions over discs and annuli
use the trapezoid rule in s plus a closure for the small disc r < r_0.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.integrate import trapezoid

from .exceptions import InvalidParameterError, ResolutionError
from .validation import validate_finite, validate_integer, validate_positive
from ..utils.constants import MeshDefaults

logger = logging.getLogger(__name__)


class RadialMesh:
    """
    Mesh s_i = s_min + i*h, i = 0..N, with r_i = exp(s_i).

    The last node sits on the boundary r = R = exp(s_max) and carries the
    Dirichlet condition in every discrete operator built on the mesh.
    """

    def __init__(self, s_min: float, s_max: float, intervals: int):
        validate_finite('s_min', s_min)
        validate_finite('s_max', s_max)
        validate_integer('intervals', intervals, min_val=2)
        if s_max <= s_min:
            raise InvalidParameterError('s_max', s_max, f"Must exceed s_min={s_min}")
        self.s_min = float(s_min)
        self.s_max = float(s_max)
        self.intervals = int(intervals)
        self.h = (self.s_max - self.s_min) / self.intervals
        self.s = self.s_min + self.h * np.arange(self.intervals + 1)
        self.s[-1] = self.s_max
        self.r = np.exp(self.s)
        # trapezoid weights in s
        self.weights = np.full(self.s.size, self.h)
        self.weights[0] = self.weights[-1] = 0.5 * self.h

    @classmethod
    def for_scales(cls, log_delta_min: float, radius: float = 1.0,
                   density: float = MeshDefaults.DENSITY,
                   margin: float = MeshDefaults.MARGIN) -> 'RadialMesh':
        """Mesh from ln(delta_1) - margin out to ln(radius)"""
        validate_positive('radius', radius)
        validate_positive('density', density)
        s_min = log_delta_min - margin
        s_max = math.log(radius)
        if s_min >= s_max:
            s_min = s_max - margin
        intervals = max(2, int(math.ceil((s_max - s_min) * density)))
        return cls(s_min, s_max, intervals)

    def refined(self, factor: int = 2) -> 'RadialMesh':
        """Same extent, `factor` times the density (nested nodes)"""
        validate_integer('factor', factor, min_val=1)
        return RadialMesh(self.s_min, self.s_max, self.intervals * factor)

    @property
    def size(self) -> int:
        return self.s.size

    @property
    def radius(self) -> float:
        return float(self.r[-1])

    @property
    def density(self) -> float:
        """Nodes per unit of ln r"""
        return self.intervals / (self.s_max - self.s_min)

    @property
    def nodes_per_decade(self) -> float:
        return self.density * math.log(10.0)

    def require_resolution(self, nodes_per_decade: float, what: str = "mesh") -> None:
        if self.nodes_per_decade < nodes_per_decade:
            raise ResolutionError(
                f"{what}: {self.nodes_per_decade:.2f} nodes per decade, need {nodes_per_decade}",
                nodes_per_decade=self.nodes_per_decade)

    def covers(self, r: float) -> bool:
        return self.r[0] <= r <= self.r[-1]

    # ========================================
    # QUADRATURE
    # ========================================

    def integrate(self, values: np.ndarray, r_min: Optional[float] = None,
                  r_max: Optional[float] = None) -> float:
        """
        2*pi * integral of f(r) r dr over r_min <= r <= r_max.

        Between nodes the integrand f r^2 is linear in s, so splitting an
        interval at an interpolated cut point leaves the total unchanged and
        annulus integrals add up to the full integral exactly.
        """
        values = np.asarray(values, dtype=float)
        if values.shape != self.s.shape:
            raise InvalidParameterError('values', values.shape, f"Expected shape {self.s.shape}")
        g = values * self.r ** 2
        s_lo = self.s_min if r_min is None or r_min <= self.r[0] else math.log(r_min)
        s_hi = self.s_max if r_max is None or r_max >= self.r[-1] else math.log(r_max)
        total = 0.0
        if r_min is None or r_min <= self.r[0]:
            # f taken constant on the inner disc r < r_0
            total += 0.5 * self.r[0] ** 2 * values[0]
        if s_hi > s_lo:
            inside = (self.s > s_lo) & (self.s < s_hi)
            s_pts = np.concatenate(([s_lo], self.s[inside], [s_hi]))
            g_pts = np.interp(s_pts, self.s, g)
            total += trapezoid(g_pts, s_pts)
        return 2.0 * math.pi * total

    def quadrature_error(self, values: np.ndarray) -> float:
        """Difference between the rule on this mesh and on every other node"""
        values = np.asarray(values, dtype=float)
        g = values * self.r ** 2
        fine = trapezoid(g, self.s)
        idx = np.arange(0, self.size, 2)
        if idx[-1] != self.size - 1:
            idx = np.append(idx, self.size - 1)
        coarse = trapezoid(g[idx], self.s[idx])
        return 2.0 * math.pi * abs(fine - coarse)

    def __repr__(self) -> str:
        return (f"RadialMesh(r=[{self.r[0]:.3e}, {self.r[-1]:.3e}], nodes={self.size}, "
                f"density={self.density:.1f})")


@dataclass(frozen=True, eq=False)
class RadialField:
    """Nodal values of a radial function on a RadialMesh"""
    mesh: RadialMesh
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.mesh.s.shape:
            raise InvalidParameterError('values', values.shape,
                                        f"Expected shape {self.mesh.s.shape}")
        object.__setattr__(self, 'values', values)

    @property
    def r(self) -> np.ndarray:
        return self.mesh.r

    def at(self, r: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Linear interpolation in s; clamps outside the mesh"""
        s = np.log(np.asarray(r, dtype=float))
        out = np.interp(s, self.mesh.s, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def sup(self, r_min: float = 0.0, r_max: float = math.inf) -> float:
        mask = (self.mesh.r >= r_min) & (self.mesh.r <= r_max)
        if not np.any(mask):
            return 0.0
        return float(np.max(np.abs(self.values[mask])))

    def integral(self, r_min: Optional[float] = None, r_max: Optional[float] = None) -> float:
        return self.mesh.integrate(self.values, r_min=r_min, r_max=r_max)

    def _other(self, other):
        if isinstance(other, RadialField):
            if other.mesh is not self.mesh:
                raise InvalidParameterError('other', other.mesh, "Fields live on different meshes")
            return other.values
        return other

    def __add__(self, other) -> 'RadialField':
        return RadialField(self.mesh, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other) -> 'RadialField':
        return RadialField(self.mesh, self.values - self._other(other))

    def __mul__(self, other) -> 'RadialField':
        return RadialField(self.mesh, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self) -> 'RadialField':
        return RadialField(self.mesh, -self.values)
