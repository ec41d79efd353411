"""
Corrections phi with u = W + phi solving -Laplace u = lambda (e^u - e^-u)

Both paths solve the same discrete problem on the radial mesh,

    F(u) = K u - M lambda f(u) = 0,    u = 0 on the last node,

with K and M the mode-0 forms of the linearized operator. The contraction
iterates L phi_{n+1} = N(phi_n) + S phi_n - R with the weak residual
R = K W - M lambda f(W); Newton works on u directly with Armijo damping.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse.linalg import splu

from .core.exceptions import (ContractionDivergedError, InvalidParameterError, LinearSolveError,
                              NewtonError, NumericalOverflowError)
from .core.mesh import RadialField, RadialMesh
from .core.validation import validate_choices, validate_positive
from .greens import DomainSpec, green_origin
from .linearized import (build_operator, min_singular_value, mode_forms,
                         operator_from_potential, tower_potential)
from .residual import lambda_exp, lambda_sinh, lambda_sinh_prime, nonlinear_values
from .tower import Ansatz, assemble_ansatz, default_mesh, params_for_domain
from .utils.constants import SolverDefaults, SolverMethods

logger = logging.getLogger(__name__)


@dataclass
class SolveResult:
    """Converged u = W + phi with its diagnostics"""
    k: int
    lam: float
    domain: DomainSpec
    method: str
    u: RadialField
    W: RadialField
    phi_norm: float
    masses: Tuple[float, float]
    history: List[float]
    farfield_gap: float
    r_cut: float
    log_delta_outer: Optional[float] = None
    contraction_ratio: Optional[float] = None
    path_gap: Optional[float] = None

    @property
    def phi(self) -> RadialField:
        return self.u - self.W

    @property
    def iterations(self) -> int:
        return len(self.history) - 1

    def profile_rows(self) -> List[Dict[str, float]]:
        phi = self.phi.values
        return [{"r": float(r), "u": float(u), "W": float(w), "phi": float(p)}
                for r, u, w, p in zip(self.u.r, self.u.values, self.W.values, phi)]

    def to_dict(self) -> dict:
        m_plus, m_minus = self.masses
        return {
            "k": self.k,
            "lambda": self.lam,
            "domain": self.domain.to_dict(),
            "method": self.method,
            "phi_norm": self.phi_norm,
            "m_plus": m_plus,
            "m_minus": m_minus,
            "ohtsuka_suzuki": ohtsuka_suzuki_check(m_plus, m_minus),
            "history": list(self.history),
            "farfield_gap": self.farfield_gap,
            "r_cut": self.r_cut,
            "contraction_ratio": self.contraction_ratio,
            "path_gap": self.path_gap,
            "sign_changes": count_sign_changes(self.u),
        }


# ========================================
# DISCRETE PROBLEM
# ========================================

class _DiscreteProblem:
    """Mode-0 forms on a mesh with the dual energy norm of residuals"""

    def __init__(self, mesh: RadialMesh, log_lam: float):
        self.mesh = mesh
        self.log_lam = log_lam
        self.n = mesh.size - 1
        self.stiffness, self.mass = mode_forms(mesh, 0)
        self._stiffness_lu = splu(self.stiffness.tocsc())

    def residual(self, u: np.ndarray) -> np.ndarray:
        return self.stiffness @ u - self.mass * lambda_sinh(self.log_lam, u)

    def dual_norm(self, residual: np.ndarray) -> float:
        """sqrt(F^T K^-1 F), the H^-1 size of a weak residual"""
        return math.sqrt(max(float(residual @ self._stiffness_lu.solve(residual)), 0.0))

    def jacobian(self, u: np.ndarray):
        return operator_from_potential(self.mesh, 0, np.append(lambda_sinh_prime(self.log_lam, u), 0.0))

    def energy_norm(self, values: np.ndarray) -> float:
        v = values[:self.n]
        return math.sqrt(max(2.0 * math.pi * float(v @ (self.stiffness @ v)), 0.0))


def energy_norm(field_: RadialField) -> float:
    """(integral of |grad u|^2)^(1/2) for a radial field"""
    values = field_.values
    return math.sqrt(2.0 * math.pi * float(np.sum(np.diff(values) ** 2)) / field_.mesh.h)


def convergence_order(history: Sequence[float], floor: float = 1e-13) -> float:
    """ln(e_{n+1}/e_n) / ln(e_n/e_{n-1}) from the last three residuals above the floor"""
    usable = [e for e in history if e > floor]
    if len(usable) < 3:
        return math.nan
    e0, e1, e2 = usable[-3:]
    if e1 >= e0:
        return math.nan
    return math.log(e2 / e1) / math.log(e1 / e0)


# ========================================
# CONTRACTION
# ========================================

def contraction_iterate(ansatz: Ansatz, max_iter: int = SolverDefaults.CONTRACTION_MAX_ITER,
                        tol: float = SolverDefaults.CONTRACTION_TOL,
                        include_nonlinear: bool = True,
                        include_linear_error: bool = True) -> SolveResult:
    """
    phi_{n+1} = L^-1 (N(phi_n) + S phi_n - R) from phi_0 = 0 in the even sector.

    Stops when the energy norm of phi_{n+1} - phi_n drops below tol. With both
    include flags off the map is affine and the first step is the fixed point.
    """
    ansatz.domain.require_disk("contraction_iterate")
    params, mesh = ansatz.params, ansatz.mesh
    problem = _DiscreteProblem(mesh, params.log_lambda)
    operator = build_operator(params, mesh, 0, symmetric=True)
    n = problem.n
    # W is taken with its boundary node set to zero
    W = ansatz.W.values[:n]
    weak_residual = problem.residual(W)
    potential = tower_potential(params, mesh.r)[:n]
    linear_error = lambda_sinh_prime(params.log_lambda, W) - potential

    phi = np.zeros(n)
    history = [problem.dual_norm(weak_residual)]
    steps: List[float] = []
    ratios: List[float] = []
    streak = 0
    for iteration in range(1, max_iter + 1):
        source = np.zeros(n)
        if include_nonlinear:
            source += nonlinear_values(params.log_lambda, W, phi)
        if include_linear_error:
            source += linear_error * phi
        new_phi = operator.lu.solve(problem.mass * source - weak_residual)
        step = problem.energy_norm(new_phi - phi)
        if not math.isfinite(step):
            raise ContractionDivergedError(ratios, "iterate blew up; use a smaller lambda or "
                                                   "the newton method")
        phi = new_phi
        steps.append(step)
        try:
            history.append(problem.dual_norm(problem.residual(W + phi)))
        except NumericalOverflowError:
            raise ContractionDivergedError(ratios, "nonlinear term overflowed; use a smaller "
                                                   "lambda or the newton method")
        if len(steps) > 1 and steps[-2] > 0:
            ratio = step / steps[-2]
            ratios.append(ratio)
            streak = streak + 1 if ratio >= 1.0 else 0
            logger.debug(f"contraction step {iteration}: |dphi|={step:.3e} ratio={ratio:.3f}")
            if streak >= SolverDefaults.DIVERGENCE_STEPS:
                logger.error(f"Contraction diverging at lambda={params.lam:.3e}")
                raise ContractionDivergedError(ratios, "use a smaller lambda or the newton method")
        if step < tol:
            break
    else:
        raise ContractionDivergedError(ratios, f"no convergence in {max_iter} steps; "
                                               f"raise max_iter or use the newton method")

    u = np.append(W + phi, 0.0)
    ratio = max(ratios, default=0.0)
    logger.info(f"✅ Contraction converged in {len(steps)} steps (ratio {ratio:.3f})")
    return _result(ansatz, u, history, SolverMethods.CONTRACTION, contraction_ratio=ratio)


# ========================================
# NEWTON
# ========================================

def newton_solve(domain: DomainSpec, lam: float, u0: RadialField,
                 tol: float = SolverDefaults.NEWTON_TOL,
                 max_iter: int = SolverDefaults.NEWTON_MAX_ITER,
                 ansatz: Ansatz = None) -> SolveResult:
    """
    Damped Newton on the discrete equation, started from u0.

    The Armijo test halves the step until |F(u + t du)| <= (1 - c t)|F(u)| in
    the dual energy norm. Iteration also stops once a full step is below
    NEWTON_STEP_RTOL times the energy of u. Passing the ansatz attaches W, k
    and the scales to the result.
    """
    domain.require_disk("newton_solve")
    validate_positive('lambda', lam)
    mesh = u0.mesh
    problem = _DiscreteProblem(mesh, math.log(lam))
    u = u0.values[:problem.n].copy()

    try:
        F = problem.residual(u)
    except NumericalOverflowError as e:
        raise NewtonError(f"initial guess overflows: {e}", iterations=0)
    norm = problem.dual_norm(F)
    history = [norm]
    for iteration in range(1, max_iter + 1):
        if norm < tol:
            break
        jacobian = problem.jacobian(u)
        try:
            du = jacobian.lu.solve(-F)
        except LinearSolveError as e:
            try:
                sigma = min_singular_value(jacobian)
            except LinearSolveError:
                sigma = None
            logger.error(f"Singular Jacobian at Newton step {iteration}")
            raise NewtonError(f"singular Jacobian ({e})", sigma_min=sigma, iterations=iteration)

        if problem.energy_norm(du) <= SolverDefaults.NEWTON_STEP_RTOL * max(1.0, problem.energy_norm(u)):
            # F is at the rounding floor of K u
            u = u + du
            F = problem.residual(u)
            norm = problem.dual_norm(F)
            history.append(norm)
            logger.debug(f"newton step {iteration}: step below rounding floor, |F|={norm:.3e}")
            break

        t = 1.0
        for _ in range(SolverDefaults.ARMIJO_HALVINGS + 1):
            trial = u + t * du
            try:
                trial_F = problem.residual(trial)
            except NumericalOverflowError:
                t *= 0.5
                continue
            trial_norm = problem.dual_norm(trial_F)
            if trial_norm <= (1.0 - SolverDefaults.ARMIJO_C * t) * norm:
                break
            t *= 0.5
        else:
            raise NewtonError(f"line search failed after {SolverDefaults.ARMIJO_HALVINGS} "
                              f"halvings", iterations=iteration)
        u, F, norm = trial, trial_F, trial_norm
        history.append(norm)
        logger.debug(f"newton step {iteration}: |F|={norm:.3e} t={t:g}")
    else:
        if norm >= tol:
            raise NewtonError(f"no convergence in {max_iter} steps (|F|={norm:.3e})",
                              iterations=max_iter)

    logger.info(f"✅ Newton converged in {len(history) - 1} steps (|F|={norm:.2e})")
    full = np.append(u, 0.0)
    if ansatz is not None:
        return _result(ansatz, full, history, SolverMethods.NEWTON)
    zero = RadialField(mesh, np.zeros(mesh.size))
    return _build(0, lam, domain, SolverMethods.NEWTON, RadialField(mesh, full), zero,
                  history, None)


def _result(ansatz: Ansatz, u: np.ndarray, history: List[float], method: str,
            contraction_ratio: float = None) -> SolveResult:
    params = ansatz.params
    return _build(params.k, params.lam, ansatz.domain, method, RadialField(ansatz.mesh, u),
                  ansatz.W, history, params.log_delta[-1], contraction_ratio)


def _build(k: int, lam: float, domain: DomainSpec, method: str, u: RadialField,
           W: RadialField, history: List[float], log_delta_outer: Optional[float],
           contraction_ratio: float = None) -> SolveResult:
    r_cut = SolverDefaults.R_CUT_FRACTION * domain.inradius
    pair = masses(u, lam, r_cut, log_delta_outer)
    gap = farfield_compare(u, k, domain)
    phi_norm = energy_norm(u - W)
    return SolveResult(k, lam, domain, method, u, W, phi_norm, pair, list(history), gap,
                       r_cut, log_delta_outer, contraction_ratio)


# ========================================
# CONCLUSIONS OF THE CONSTRUCTION
# ========================================

def masses(u: Union[SolveResult, RadialField], lam: float = None, r_cut: float = None,
           log_delta_outer: float = None) -> Tuple[float, float]:
    """(m_+, m_-) = 2 pi integral over r < r_cut of lambda e^(+-u) r dr"""
    if isinstance(u, SolveResult):
        lam = u.lam if lam is None else lam
        r_cut = u.r_cut if r_cut is None else r_cut
        log_delta_outer = u.log_delta_outer if log_delta_outer is None else log_delta_outer
        u = u.u
    validate_positive('lambda', lam)
    mesh = u.mesh
    r_cut = SolverDefaults.R_CUT_FRACTION * mesh.radius if r_cut is None else r_cut
    validate_positive('r_cut', r_cut)
    if r_cut > mesh.radius:
        raise InvalidParameterError('r_cut', r_cut, f"Must lie inside r <= {mesh.radius}")
    if log_delta_outer is not None and math.log(r_cut) <= log_delta_outer:
        raise InvalidParameterError('r_cut', r_cut,
                                    f"Must exceed delta_k={math.exp(log_delta_outer):.3e}")
    log_lam = math.log(lam)
    m_plus = mesh.integrate(lambda_exp(log_lam, u.values), r_max=r_cut)
    m_minus = mesh.integrate(lambda_exp(log_lam, -u.values), r_max=r_cut)
    return m_plus, m_minus


def ohtsuka_suzuki_check(m_plus: float, m_minus: float) -> float:
    """((m_+ - m_-)^2 - 8 pi (m_+ + m_-)) / (m_+ + m_-)^2"""
    total = m_plus + m_minus
    if total <= 0:
        raise InvalidParameterError('masses', (m_plus, m_minus), "Total mass must be positive")
    return ((m_plus - m_minus) ** 2 - 8.0 * math.pi * total) / total ** 2


def farfield_target(k: int, domain: DomainSpec, r: np.ndarray) -> np.ndarray:
    """(-1)^k 8 pi k G(r, 0)"""
    r = np.asarray(r, dtype=float)
    return (-1) ** k * 8.0 * math.pi * k * green_origin(domain, np.stack([r, np.zeros_like(r)], axis=-1))


def farfield_compare(result: Union[SolveResult, RadialField], k: int = None,
                     domain: DomainSpec = None,
                     compact_annulus: Tuple[float, float] = SolverDefaults.FARFIELD_ANNULUS) -> float:
    """sup over compact_annulus * R of |u - (-1)^k 8 pi k G(., 0)|"""
    if isinstance(result, SolveResult):
        k = result.k if k is None else k
        domain = domain or result.domain
        result = result.u
    domain = domain or DomainSpec.disk()
    domain.require_disk("farfield_compare")
    lo, hi = compact_annulus
    if not 0.0 < lo < hi < 1.0:
        raise InvalidParameterError('compact_annulus', compact_annulus,
                                    "Must satisfy 0 < lo < hi < 1")
    radius = domain.radius
    r = result.r
    mask = (r >= lo * radius) & (r <= hi * radius)
    samples = np.concatenate(([lo * radius], r[mask], [hi * radius]))
    return float(np.max(np.abs(result.at(samples) - farfield_target(k, domain, samples))))


@dataclass
class MoserTrudingerCheck:
    """ln of both sides of  integral e^(eta u) <= c |Omega| e^(eta^2 |u|^2 / (16 pi))"""
    log_lhs: float
    log_rhs: float

    @property
    def holds(self) -> bool:
        return self.log_lhs <= self.log_rhs

    @property
    def margin(self) -> float:
        return self.log_rhs - self.log_lhs

    def __bool__(self) -> bool:
        return self.holds


def moser_trudinger_spot_check(field_: RadialField, eta: float,
                               c: float = SolverDefaults.MOSER_TRUDINGER_C) -> MoserTrudingerCheck:
    mesh = field_.mesh
    exponent = eta * field_.values
    shift = float(np.max(exponent))
    integral = mesh.integrate(np.exp(exponent - shift))
    log_lhs = shift + math.log(integral)
    area = math.pi * mesh.radius ** 2
    log_rhs = math.log(c * area) + eta * eta * energy_norm(field_) ** 2 / (16.0 * math.pi)
    return MoserTrudingerCheck(log_lhs, log_rhs)


def count_sign_changes(u: RadialField, rtol: float = 1e-8) -> int:
    """Radial sign changes of u, ignoring values below rtol * max|u|"""
    values = u.values
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    if scale == 0.0:
        return 0
    signs = np.sign(values[np.abs(values) > rtol * scale])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


@dataclass
class MassPairCheck:
    observed: Tuple[float, float]
    expected: Tuple[float, float]
    relative_errors: Tuple[float, float]
    labels: Dict[str, float]
    rtol: float

    @property
    def passed(self) -> bool:
        return max(self.relative_errors) <= self.rtol

    def to_dict(self) -> dict:
        return {"observed": list(self.observed), "expected": list(self.expected),
                "relative_errors": list(self.relative_errors), "labels": self.labels,
                "rtol": self.rtol, "passed": self.passed}


def mass_pair_check(masses_: Tuple[float, float], k: int, rtol: float = 0.05) -> MassPairCheck:
    """
    Compare {m_+, m_-} with {4 pi k (k-1), 4 pi k (k+1)} as an unordered pair.

    Errors are relative to the larger limit mass. `labels` records which
    limit each of m_+ and m_- approaches.
    """
    m_plus, m_minus = masses_
    small, large = 4.0 * math.pi * k * (k - 1), 4.0 * math.pi * k * (k + 1)
    lo, hi = sorted((m_plus, m_minus))
    errors = (abs(lo - small) / large, abs(hi - large) / large)
    labels = ({"m_plus": small, "m_minus": large} if m_plus <= m_minus
              else {"m_plus": large, "m_minus": small})
    return MassPairCheck((m_plus, m_minus), (small, large), errors, labels, rtol)


# ========================================
# DRIVERS
# ========================================

def solve_tower(k: int, lam: float, domain: DomainSpec = None,
                method: str = SolverMethods.NEWTON, tol: float = None,
                density: float = None, seed: RadialField = None) -> SolveResult:
    """
    Assemble the ansatz at (k, lambda) and correct it.

    `seed` is a correction from a nearby lambda (on any mesh); Newton then
    starts from W + seed instead of W.
    """
    domain = domain or DomainSpec.disk()
    domain.require_disk("solve")
    validate_choices('method', method, SolverMethods.ALL)
    params = params_for_domain(k, lam, domain)
    ansatz = assemble_ansatz(params, domain, mesh=default_mesh(params, domain, density))

    if method == SolverMethods.CONTRACTION:
        return contraction_iterate(ansatz, tol=tol or SolverDefaults.CONTRACTION_TOL)
    u0 = ansatz.W
    if seed is not None:
        correction = seed.at(ansatz.mesh.r)
        correction[-1] = 0.0
        u0 = ansatz.W + correction
    newton = newton_solve(domain, lam, u0, tol=tol or SolverDefaults.NEWTON_TOL, ansatz=ansatz)
    if method == SolverMethods.NEWTON:
        return newton
    try:
        contraction = contraction_iterate(ansatz)
    except ContractionDivergedError as e:
        logger.warning(f"Contraction failed at lambda={lam:.3e}: {e}")
        return newton
    newton.path_gap = float(np.max(np.abs(newton.u.values - contraction.u.values)))
    newton.contraction_ratio = contraction.contraction_ratio
    newton.method = SolverMethods.BOTH
    return newton


@dataclass
class ContinuationSweep:
    k: int
    results: List[SolveResult] = field(default_factory=list)

    @property
    def lambdas(self) -> List[float]:
        return [r.lam for r in self.results]

    def farfield_gaps(self) -> List[float]:
        return [r.farfield_gap for r in self.results]

    def farfield_monotone(self) -> bool:
        gaps = self.farfield_gaps()
        return all(b < a for a, b in zip(gaps, gaps[1:]))

    def ohtsuka_suzuki(self) -> List[float]:
        return [ohtsuka_suzuki_check(*r.masses) for r in self.results]

    def phi_bound(self) -> List[float]:
        """|phi| / (lambda^(1/(2(2k-1))) |ln lambda|) per point"""
        exponent = 1.0 / (2.0 * (2 * self.k - 1))
        return [r.phi_norm / (r.lam ** exponent * abs(math.log(r.lam))) for r in self.results]

    def rows(self) -> List[dict]:
        return [r.to_dict() for r in self.results]


def continuation_sweep(k: int, lambdas: Sequence[float], domain: DomainSpec = None,
                       method: str = SolverMethods.NEWTON, tol: float = None,
                       density: float = None) -> ContinuationSweep:
    """
    Solve from the largest lambda down, seeding each Newton solve with the
    fresh ansatz plus the previous correction.
    """
    domain = domain or DomainSpec.disk()
    sweep = ContinuationSweep(k)
    previous: Optional[SolveResult] = None
    for lam in sorted((float(v) for v in lambdas), reverse=True):
        seed = previous.phi if previous is not None and method != SolverMethods.CONTRACTION else None
        try:
            result = solve_tower(k, lam, domain, method, tol, density, seed=seed)
        except NewtonError:
            if seed is None:
                raise
            logger.warning(f"Seeded Newton failed at lambda={lam:.3e}, restarting from W")
            result = solve_tower(k, lam, domain, method, tol, density)
        sweep.results.append(result)
        previous = result
    logger.info(f"📈 Continuation k={k}: {len(sweep.results)} solves")
    return sweep
