"""
TowerLab Testing Interface

Seeded random test functions for the verification checks. The stereographic
identities, the Moser-Trudinger spot check and the harmonic-extension
symmetry checks all quantify over "every" function of a class; these
helpers draw reproducible members of those classes.

Example:
    ```python
    from towerlab.testing import random_radial_functions
    from towerlab.limit_profiles import stereographic_norm_ratio

    for fn in random_radial_functions(5, seed=7):
        assert abs(stereographic_norm_ratio(6, fn) - 3.0) < 1e-8
    ```

Warning:
    These helpers are for verification runs and tests. Results depend only on
    the seed, never on global random state.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from .core.mesh import RadialField, RadialMesh
from .core.validation import validate_integer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RadialTestFunction:
    """
    u(r) = a + sum_j c_j / (1 + (r / l_j)^2)

    Bounded, smooth at the origin and with square-integrable gradient, so it
    has finite L_alpha and Dirichlet norms for every alpha >= 2.
    """
    offset: float
    coefficients: Tuple[float, ...]
    scales: Tuple[float, ...]

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.full(r.shape, self.offset)
        for c, scale in zip(self.coefficients, self.scales):
            out = out + c / (1.0 + (r / scale) ** 2)
        return out

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape)
        for c, scale in zip(self.coefficients, self.scales):
            q = 1.0 + (r / scale) ** 2
            out = out - 2.0 * c * r / (scale * scale * q * q)
        return out

    def on_mesh(self, mesh: RadialMesh, dirichlet: bool = True) -> RadialField:
        """Samples on a mesh, shifted to vanish at the boundary when dirichlet is set"""
        values = self(mesh.r)
        if dirichlet:
            values = values - values[-1]
        return RadialField(mesh, values)


def random_radial_function(rng: np.random.Generator, terms: int = 3) -> RadialTestFunction:
    validate_integer('terms', terms, min_val=1)
    return RadialTestFunction(
        offset=float(rng.normal()),
        coefficients=tuple(float(c) for c in rng.normal(size=terms)),
        scales=tuple(float(s) for s in np.exp(rng.uniform(-1.5, 1.5, size=terms))),
    )


def random_radial_functions(count: int, seed: int = 0, terms: int = 3) -> List[RadialTestFunction]:
    """`count` reproducible radial test functions"""
    validate_integer('count', count, min_val=1)
    rng = np.random.default_rng(seed)
    functions = [random_radial_function(rng, terms) for _ in range(count)]
    logger.debug(f"🧪 Drew {count} radial test functions (seed={seed})")
    return functions


def random_even_boundary_data(seed: int = 0, modes: int = 4) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """
    g(x, y) = a_0 + sum_m (a_m cos(2 m theta) + b_m sin(2 m theta)) * (1 + |x|^2)^-1/2

    Every term is invariant under (x, y) -> (-x, -y).
    """
    validate_integer('modes', modes, min_val=0)
    rng = np.random.default_rng(seed)
    a = rng.normal(size=modes + 1)
    b = rng.normal(size=modes + 1)

    def data(px, py):
        px = np.asarray(px, dtype=float)
        py = np.asarray(py, dtype=float)
        theta = np.arctan2(py, px)
        envelope = 1.0 / np.sqrt(1.0 + px * px + py * py)
        out = np.full(np.broadcast(px, py).shape, a[0])
        for m in range(1, modes + 1):
            out = out + (a[m] * np.cos(2 * m * theta) + b[m] * np.sin(2 * m * theta)) * envelope
        return out

    return data
