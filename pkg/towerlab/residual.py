"""
Error fields of the ansatz and their L^p norms

    R = -Laplace(W) - lambda f(W)                 f(s) = e^s - e^-s
    S = lambda f'(W) - sum_i r^(alpha_i - 2) e^(w_i)
    N(phi) = lambda [f(W + phi) - f(W) - f'(W) phi]

-Laplace(W) is taken from the identity sum_i (-1)^i r^(alpha_i - 2) e^(w_i),
never from a discrete Laplacian. Exponentials carry ln(lambda) inside the
exponent so lambda e^(|W|) is formed without overflow.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .core.exceptions import InvalidParameterError, NumericalOverflowError
from .core.mesh import RadialField
from .greens import DomainSpec
from .limit_profiles import log_bubble_terms
from .tower import (AnnulusDecomposition, Ansatz, annulus_decomposition, assemble_ansatz,
                    default_mesh, params_for_domain, theta_values)
from .utils.constants import EXP_LIMIT, NormDefaults, ProjectionModes

logger = logging.getLogger(__name__)


# ========================================
# POINTWISE NONLINEARITIES
# ========================================

def lambda_exp(log_lam: float, values: np.ndarray) -> np.ndarray:
    """lambda * exp(values)"""
    exponent = log_lam + np.asarray(values, dtype=float)
    worst = float(np.max(exponent)) if exponent.size else -math.inf
    if worst > EXP_LIMIT:
        raise NumericalOverflowError(f"lambda e^u overflows (exponent {worst:.1f})", exponent=worst)
    return np.exp(exponent)


def lambda_sinh(log_lam: float, values: np.ndarray) -> np.ndarray:
    """lambda (e^u - e^-u) as sign(u) lambda e^|u| (1 - e^(-2|u|))"""
    values = np.asarray(values, dtype=float)
    mag = np.abs(values)
    return np.sign(values) * lambda_exp(log_lam, mag) * -np.expm1(-2.0 * mag)


def lambda_sinh_prime(log_lam: float, values: np.ndarray) -> np.ndarray:
    """lambda (e^u + e^-u)"""
    mag = np.abs(np.asarray(values, dtype=float))
    return lambda_exp(log_lam, mag) * (1.0 + np.exp(-2.0 * mag))


def _exp_remainder(phi: np.ndarray) -> np.ndarray:
    """e^phi - 1 - phi without cancellation near 0"""
    phi = np.asarray(phi, dtype=float)
    small = np.abs(phi) < 1e-3
    out = np.expm1(phi) - phi
    p = phi[small]
    out[small] = p * p * (0.5 + p * (1.0 / 6.0 + p / 24.0))
    return out


def nonlinear_values(log_lam: float, W: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """lambda e^W (e^phi - 1 - phi) - lambda e^-W (e^-phi - 1 + phi)"""
    W = np.asarray(W, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return (lambda_exp(log_lam, W) * _exp_remainder(phi)
            - lambda_exp(log_lam, -W) * _exp_remainder(-phi))


def bubble_densities(ansatz: Ansatz) -> np.ndarray:
    """Rows r^(alpha_i - 2) e^(w_i) on the ansatz mesh"""
    s = ansatz.mesh.s
    rows = []
    for alpha, log_delta in zip(ansatz.params.alpha, ansatz.params.log_delta):
        rows.append(np.exp((alpha - 2.0) * s + log_bubble_terms(alpha, log_delta, s)))
    return np.vstack(rows)


def linear_error(log_lam: float, W: np.ndarray, potential: np.ndarray) -> np.ndarray:
    """lambda f'(W) - V; with no bubbles (V = 0, W = 0) this is 2 lambda"""
    return lambda_sinh_prime(log_lam, W) - np.asarray(potential, dtype=float)


# ========================================
# FIELDS
# ========================================

def residual_field(ansatz: Ansatz) -> RadialField:
    """R = sum_i (-1)^i r^(alpha_i-2) e^(w_i) - lambda f(W)"""
    ansatz.domain.require_disk("residual_field")
    densities = bubble_densities(ansatz)
    signs = np.array([(-1.0) ** i for i in range(1, ansatz.params.k + 1)])
    laplacian = signs @ densities
    return RadialField(ansatz.mesh,
                       laplacian - lambda_sinh(ansatz.params.log_lambda, ansatz.W.values))


def linear_error_field(ansatz: Ansatz) -> RadialField:
    """S = lambda f'(W) - sum_i r^(alpha_i-2) e^(w_i)"""
    ansatz.domain.require_disk("linear_error_field")
    potential = bubble_densities(ansatz).sum(axis=0)
    return RadialField(ansatz.mesh,
                       linear_error(ansatz.params.log_lambda, ansatz.W.values, potential))


def nonlinear_term(ansatz: Ansatz, phi: Union[RadialField, np.ndarray]) -> RadialField:
    """N(phi) evaluated pointwise in compensated form"""
    values = phi.values if isinstance(phi, RadialField) else np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(values)):
        raise InvalidParameterError('phi', '<field>', "Must be finite")
    return RadialField(ansatz.mesh,
                       nonlinear_values(ansatz.params.log_lambda, ansatz.W.values, values))


# ========================================
# NORMS
# ========================================

@dataclass
class NormReport:
    """L^p norm of a radial field, total and per annulus"""
    p: float
    total_norm: float
    per_annulus: List[Tuple[int, float]]
    quadrature_error_estimate: float

    def consistency_defect(self) -> float:
        """| total^p - sum_j norm_j^p |"""
        return abs(self.total_norm ** self.p - sum(n ** self.p for _, n in self.per_annulus))

    def to_dict(self) -> dict:
        return {"p": self.p, "total_norm": self.total_norm,
                "per_annulus": [[j, n] for j, n in self.per_annulus],
                "quadrature_error_estimate": self.quadrature_error_estimate}


def lp_norm(field_: RadialField, p: float, decomposition: AnnulusDecomposition) -> NormReport:
    """(2 pi int |f|^p r dr)^(1/p) over the whole disk and over each annulus"""
    if not (isinstance(p, (int, float)) and math.isfinite(p) and p >= 1):
        raise InvalidParameterError('p', p, "Must be >= 1")
    mesh = field_.mesh
    integrand = np.abs(field_.values) ** p
    total = mesh.integrate(integrand)
    per = []
    for j in range(1, decomposition.k + 1):
        lo, hi = decomposition.annulus(j)
        part = mesh.integrate(integrand, r_min=lo, r_max=hi)
        per.append((j, max(part, 0.0) ** (1.0 / p)))
    total_norm = max(total, 0.0) ** (1.0 / p)
    d_integral = mesh.quadrature_error(integrand)
    error = (total ** (1.0 / p - 1.0) * d_integral / p) if total > 0 else 0.0
    return NormReport(float(p), total_norm, per, float(error))


@dataclass
class MechanismNorms:
    """Per-annulus norms of the three parts of R on A_j"""
    j: int
    self_interaction: float      # (-1)^j r^(a_j-2) e^(w_j) (1 - e^Theta_j)
    opposite_exponential: float  # (-1)^j lambda e^(-(-1)^j W)
    cross_tails: float           # sum_{i != j} (-1)^i r^(a_i-2) e^(w_i)
    residual: float              # norm of R itself on A_j
    split_defect: float          # sup |I1 + I2 + I3 - R| on A_j


def mechanism_fields(ansatz: Ansatz, j: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(I1, I2, I3, mask) on the nodes of A_j widened by one node on each side"""
    ansatz.domain.require_disk("mechanism_breakdown")
    mesh = ansatz.mesh
    params = ansatz.params
    lo, hi = annulus_decomposition(params, mesh.radius).annulus(j)
    inside = (mesh.r >= lo) & (mesh.r <= hi)
    mask = inside.copy()
    idx = np.nonzero(inside)[0]
    if idx.size:
        mask[max(idx[0] - 1, 0)] = True
        mask[min(idx[-1] + 1, mesh.size - 1)] = True
    densities = bubble_densities(ansatz)
    sign_j = (-1.0) ** j
    i1 = np.zeros(mesh.size)
    theta_j = theta_values(params, j, mesh.r[mask], ansatz.domain, ansatz.mode)
    i1[mask] = sign_j * densities[j - 1, mask] * -np.expm1(theta_j)
    i2 = np.zeros(mesh.size)
    i2[mask] = sign_j * lambda_exp(params.log_lambda, -sign_j * ansatz.W.values[mask])
    others = [i for i in range(params.k) if i != j - 1]
    i3 = np.zeros(mesh.size)
    for i in others:
        i3[mask] += (-1.0) ** (i + 1) * densities[i, mask]
    return i1, i2, i3, mask


def mechanism_breakdown(ansatz: Ansatz, p: float = NormDefaults.P) -> List[MechanismNorms]:
    """Split R on every annulus into self-interaction, opposite-sign and cross-tail parts"""
    mesh = ansatz.mesh
    residual = residual_field(ansatz).values
    decomposition = annulus_decomposition(ansatz.params, mesh.radius)
    rows = []
    for j in range(1, ansatz.params.k + 1):
        lo, hi = decomposition.annulus(j)
        i1, i2, i3, mask = mechanism_fields(ansatz, j)

        def norm(values):
            return mesh.integrate(np.abs(values) ** p, r_min=lo, r_max=hi) ** (1.0 / p)

        local_r = np.where(mask, residual, 0.0)
        scale = max(1.0, float(np.max(np.abs(local_r))))
        defect = float(np.max(np.abs(i1 + i2 + i3 - local_r))) / scale
        rows.append(MechanismNorms(j, norm(i1), norm(i2), norm(i3), norm(local_r), defect))
    return rows


# ========================================
# SCALING LAWS
# ========================================

def predicted_exponent(p: float, k: int) -> float:
    """(2 - p) / (2 p (2k - 1))"""
    return (2.0 - p) / (2.0 * p * (2 * k - 1))


@dataclass
class ScalingFit:
    exponent_fitted: float
    exponent_predicted: float
    lambdas: List[float]
    norms: List[float]
    fit_residual: float
    slack: float = NormDefaults.SLOPE_SLACK

    @property
    def passed(self) -> bool:
        """Upper bounds allow faster decay, never slower"""
        return self.exponent_fitted >= self.exponent_predicted - self.slack

    def to_dict(self) -> dict:
        return {"exponent_fitted": self.exponent_fitted,
                "exponent_predicted": self.exponent_predicted,
                "lambdas": list(self.lambdas), "norms": list(self.norms),
                "fit_residual": self.fit_residual, "slack": self.slack, "passed": self.passed}


def scaling_fit(lambdas: Sequence[float], norms: Sequence[float], predicted: float,
                slack: float = NormDefaults.SLOPE_SLACK) -> ScalingFit:
    """Least-squares slope of ln(norm) against ln(lambda)"""
    lam = np.asarray(lambdas, dtype=float)
    val = np.asarray(norms, dtype=float)
    if lam.shape != val.shape or lam.size < NormDefaults.MIN_SWEEP_POINTS:
        raise InvalidParameterError('lambdas', lam.size,
                                    f"Need >= {NormDefaults.MIN_SWEEP_POINTS} paired sweep points")
    if np.any(lam <= 0) or np.any(val <= 0) or not np.all(np.isfinite(val)):
        raise InvalidParameterError('norms', '<sweep>', "lambdas and norms must be positive and finite")
    order = np.argsort(-lam)
    lam, val = lam[order], val[order]
    if np.any(np.diff(lam) >= 0):
        raise InvalidParameterError('lambdas', lam.tolist(), "Must be distinct")
    if math.log10(lam[0] / lam[-1]) < NormDefaults.MIN_SWEEP_DECADES - 1e-9:
        raise InvalidParameterError('lambdas', lam.tolist(),
                                    f"Must span >= {NormDefaults.MIN_SWEEP_DECADES} decades")
    x, y = np.log(lam), np.log(val)
    slope, intercept = np.polyfit(x, y, 1)
    fit_residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return ScalingFit(float(slope), float(predicted), lam.tolist(), val.tolist(), fit_residual, slack)


@dataclass
class ResidualSweep:
    k: int
    p: float
    lambdas: List[float]
    residual_reports: List[NormReport]
    linear_reports: List[NormReport]
    residual_fit: Optional[ScalingFit] = None
    linear_fit: Optional[ScalingFit] = None


def residual_norms(k: int, lam: float, p: float, domain: DomainSpec = None,
                   density: float = None) -> Tuple[NormReport, NormReport]:
    """||R||_p and ||S||_p reports for one lambda"""
    domain = domain or DomainSpec.disk()
    params = params_for_domain(k, lam, domain)
    ansatz = assemble_ansatz(params, domain, ProjectionModes.EXACT,
                             default_mesh(params, domain, density))
    decomposition = ansatz.decomposition()
    return (lp_norm(residual_field(ansatz), p, decomposition),
            lp_norm(linear_error_field(ansatz), p, decomposition))


def residual_sweep(k: int, lambdas: Sequence[float], p: float = NormDefaults.P,
                   domain: DomainSpec = None, density: float = None,
                   slack: float = NormDefaults.SLOPE_SLACK) -> ResidualSweep:
    """Norms of R and S along a lambda sweep plus their scaling fits"""
    lambdas = sorted((float(v) for v in lambdas), reverse=True)
    r_reports, s_reports = [], []
    for lam in lambdas:
        r_report, s_report = residual_norms(k, lam, p, domain, density)
        r_reports.append(r_report)
        s_reports.append(s_report)
        logger.info(f"📉 k={k} p={p} lambda={lam:.2e}: ||R||={r_report.total_norm:.3e} "
                    f"||S||={s_report.total_norm:.3e}")
    sweep = ResidualSweep(k, p, lambdas, r_reports, s_reports)
    if len(lambdas) >= NormDefaults.MIN_SWEEP_POINTS:
        target = predicted_exponent(p, k)
        sweep.residual_fit = scaling_fit(lambdas, [r.total_norm for r in r_reports], target, slack)
        sweep.linear_fit = scaling_fit(lambdas, [s.total_norm for s in s_reports], target, slack)
    return sweep
