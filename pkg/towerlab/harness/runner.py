"""
Experiment dispatch

Each experiment kind has a payload builder and a verdict function. Verdicts
are computed from the JSON form of the payload alone, so a stored record can
be re-judged offline with `recompute_verdicts`.
"""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

from ..core.exceptions import RegistryError
from ..limit_profiles import (kernel_integrals, limit_mass, stereographic_gradient_bounds,
                              stereographic_norm_ratio)
from ..linearized import SpectrumSweep, discretization_floor, spectrum_at
from ..residual import predicted_exponent, residual_norms, scaling_fit
from ..solver import (ContinuationSweep, continuation_sweep, mass_pair_check,
                      ohtsuka_suzuki_check, solve_tower)
from ..testing import random_radial_functions
from ..tower import (assemble_ansatz, check_alternating_sum, default_mesh, exponent_identity,
                     parameter_table, params_for_domain, scale_balance, theta_certificate, theta_spread)
from ..utils.constants import ExperimentKinds, NormDefaults
from ..utils.json_support import to_jsonable
from .config import RunConfig, Sectors, load_thresholds
from .registry import Registry, RunRecord, input_hash, utc_timestamp

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """map over a bounded thread pool; results keep the order of `items`"""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _series(name: str, lambdas: Sequence[float], values: Sequence[float], predicted: float,
            slope: Optional[float]) -> Dict[str, Any]:
    return {"name": name, "ln_lambda": [math.log(v) for v in lambdas],
            "ln_norm": [math.log(v) if v > 0 else -math.inf for v in values],
            "predicted": predicted, "slope": slope}


# ========================================
# PARAMS
# ========================================

def _run_params(config: RunConfig) -> Dict[str, Any]:
    tables, balances, log_d = [], [], []
    for lam in config.lambdas:
        params = params_for_domain(config.k, lam, config.domain)
        tables.append({"lambda": lam, "rows": parameter_table(params)})
        balances.append(max(abs(scale_balance(params, j)) for j in range(1, config.k + 1)))
        log_d.append(params.log_d)
    drift = 0.0
    for level in zip(*log_d):
        drift = max(drift, max(abs(math.expm1(v - level[0])) for v in level))
    return {
        "k": config.k,
        "h00": params.h00,
        "tables": tables,
        "alternating_sum": check_alternating_sum(params),
        "expected_sum": (-1) ** config.k * 2 * config.k,
        "exponent_identities": [exponent_identity(j) for j in range(1, config.k + 1)],
        "balance": max(balances),
        "d_drift": drift,
    }


def _verdict_params(payload: Dict[str, Any], thresholds: Dict[str, float]) -> Dict[str, bool]:
    return {
        "alternating_sum": payload["alternating_sum"] == payload["expected_sum"],
        "exponent_identity": all(v == 0 for v in payload["exponent_identities"]),
        "scale_balance": float(payload["balance"]) < thresholds.get("balance_tol", 1e-9),
        "d_drift": float(payload["d_drift"]) < thresholds.get("drift_tol", 1e-10),
    }


# ========================================
# ANSATZ
# ========================================

def _run_ansatz(config: RunConfig) -> Dict[str, Any]:
    def one(lam):
        params = params_for_domain(config.k, lam, config.domain)
        ansatz = assemble_ansatz(params, config.domain, config.projection,
                                 default_mesh(params, config.domain, config.density))
        return {"lambda": lam, "boundary_value": ansatz.boundary_value(),
                "evenness_defect": ansatz.evenness_defect(), "nodes": ansatz.mesh.size,
                "W_min": float(ansatz.W.values.min()), "W_max": float(ansatz.W.values.max())}

    rows = parallel_map(one, list(config.lambdas), config.workers)
    certificate = theta_certificate(config.k, config.lambdas, config.domain)
    return {
        "k": config.k,
        "projection": config.projection,
        "rows": rows,
        "theta": {"lambdas": certificate.lambdas, "required": certificate.required,
                  "sup_theta": certificate.sup_theta, "constants": certificate.constants(),
                  "ratios": certificate.ratios()},
    }


def _verdict_ansatz(payload: Dict[str, Any], thresholds: Dict[str, float]) -> Dict[str, bool]:
    verdicts = {}
    if payload["projection"] == "exact":
        tol = thresholds.get("boundary_tol", 1e-8)
        verdicts["boundary"] = all(float(r["boundary_value"]) < tol for r in payload["rows"])
        verdicts["evenness"] = all(float(r["evenness_defect"]) < tol for r in payload["rows"])
    growth = thresholds.get("theta_growth", 2.0)
    for j, values in payload["theta"]["required"].items():
        verdicts[f"theta_{j}"] = theta_spread([float(v) for v in values]) < growth
    return verdicts


# ========================================
# RESIDUAL SCAN
# ========================================

def _run_residual_scan(config: RunConfig) -> Dict[str, Any]:
    lambdas = sorted(config.lambdas, reverse=True)
    scans = []
    for p in config.p:
        reports = parallel_map(lambda lam: residual_norms(config.k, lam, p, config.domain,
                                                          config.density),
                               lambdas, config.workers)
        r_norms = [r.total_norm for r, _ in reports]
        s_norms = [s.total_norm for _, s in reports]
        predicted = predicted_exponent(p, config.k)
        scan = {"p": p, "lambdas": lambdas, "predicted": predicted,
                "residual_norms": r_norms, "linear_norms": s_norms,
                "residual_reports": [r.to_dict() for r, _ in reports],
                "linear_reports": [s.to_dict() for _, s in reports],
                "residual_slope": None, "linear_slope": None}
        if len(lambdas) >= NormDefaults.MIN_SWEEP_POINTS:
            scan["residual_slope"] = scaling_fit(lambdas, r_norms, predicted).exponent_fitted
            scan["linear_slope"] = scaling_fit(lambdas, s_norms, predicted).exponent_fitted
        scan["series"] = [
            _series(f"R_p{p:g}", lambdas, r_norms, predicted, scan["residual_slope"]),
            _series(f"S_p{p:g}", lambdas, s_norms, predicted, scan["linear_slope"]),
        ]
        scans.append(scan)
    return {"k": config.k, "scans": scans}


def _verdict_residual_scan(payload: Dict[str, Any], thresholds: Dict[str, float]) -> Dict[str, bool]:
    slack = thresholds.get("slope_slack", NormDefaults.SLOPE_SLACK)
    verdicts = {}
    for scan in payload["scans"]:
        target = float(scan["predicted"]) - slack
        for name in ("residual", "linear"):
            slope = scan[f"{name}_slope"]
            if slope is not None:
                verdicts[f"{name}_p{float(scan['p']):g}"] = float(slope) >= target
    return verdicts


# ========================================
# LINEAR SPECTRUM
# ========================================

def _sector_modes(modes, symmetric: bool):
    if modes is None or not symmetric:
        return modes
    return [m for m in modes if m % 2 == 0]


def _run_linear_spectrum(config: RunConfig) -> Dict[str, Any]:
    payload: Dict[str, Any] = {"k": config.k}
    sectors = {Sectors.EVEN: [True], Sectors.FULL: [False],
               Sectors.BOTH: [True, False]}[config.sector]
    lambdas = sorted(config.lambdas, reverse=True)
    for symmetric in sectors:
        per_lambda = parallel_map(
            lambda lam: spectrum_at(config.k, lam, _sector_modes(config.modes, symmetric),
                                    symmetric, config.domain, config.density),
            lambdas, config.workers)
        sweep = SpectrumSweep(config.k, symmetric, [pt for pts in per_lambda for pt in pts])
        sigma = sweep.sigma_by_lambda()
        payload["even" if symmetric else "full"] = {
            "points": sweep.rows(),
            "lambdas": lambdas,
            "sigma_min": [sigma[lam] for lam in lambdas],
            "band_ratio": sweep.band_ratio(),
        }
        if not symmetric:
            # the collapse is only visible down to the mesh floor at the smallest lambda
            payload["full"]["floor"] = discretization_floor(
                config.k, lambdas[-1], _sector_modes(config.modes, symmetric), symmetric,
                config.domain, config.density).to_dict()
    return payload


def _verdict_linear_spectrum(payload: Dict[str, Any], thresholds: Dict[str, float]) -> Dict[str, bool]:
    verdicts = {}
    even, full = payload.get("even"), payload.get("full")
    if even is not None and len(even["lambdas"]) > 1:
        verdicts["even_band"] = float(even["band_ratio"]) <= thresholds.get("band", 5.0)
    if even is not None and full is not None:
        ratio = float(full["sigma_min"][-1]) / float(even["sigma_min"][-1])
        verdicts["full_collapse"] = ratio < thresholds.get("full_ratio", 0.05)
    return verdicts


# ========================================
# SOLVE
# ========================================

def _write_profiles(config: RunConfig, sweep: ContinuationSweep) -> List[str]:
    out_dir = Path(config.output)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for result in sweep.results:
            path = out_dir / f"solve-k{config.k}-lambda{result.lam:.3e}.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.DictWriter(fh, fieldnames=["r", "u", "W", "phi"])
                writer.writeheader()
                writer.writerows(result.profile_rows())
            paths.append(str(path))
    except OSError as e:
        raise RegistryError(f"Failed to write solve profiles to {out_dir}: {e}")
    return paths


def _run_solve(config: RunConfig) -> Dict[str, Any]:
    lambdas = config.lambdas
    if len(lambdas) == 1:
        sweep = ContinuationSweep(config.k, [solve_tower(config.k, lambdas[0], config.domain,
                                                         config.method, config.tol,
                                                         config.density)])
    else:
        sweep = continuation_sweep(config.k, lambdas, config.domain, config.method,
                                   config.tol, config.density)
    phi_norms = [r.phi_norm for r in sweep.results]
    payload = {
        "k": config.k,
        "method": config.method,
        "results": sweep.rows(),
        "phi_bound": sweep.phi_bound(),
        "mass_check": mass_pair_check(sweep.results[-1].masses, config.k).to_dict(),
        "series": [_series("phi", sweep.lambdas, phi_norms, 1.0 / (2.0 * (2 * config.k - 1)),
                           None)],
    }
    if config.output:
        payload["profiles"] = _write_profiles(config, sweep)
    return payload


def _verdict_solve(payload: Dict[str, Any], thresholds: Dict[str, float]) -> Dict[str, bool]:
    results = payload["results"]
    k = payload["k"]
    verdicts = {}
    gaps = [r["path_gap"] for r in results if r.get("path_gap") is not None]
    if gaps:
        verdicts["path_independence"] = max(float(g) for g in gaps) <= thresholds.get("path_gap", 1e-8)
    ratios = [r["contraction_ratio"] for r in results if r.get("contraction_ratio") is not None]
    if ratios:
        verdicts["contraction_ratio"] = max(float(v) for v in ratios) < \
            thresholds.get("contraction_ratio", 0.5)
    rtol = thresholds.get("mass_rtol_k1", 0.02) if k == 1 else thresholds.get("mass_rtol", 0.05)
    errors = [float(e) for e in payload["mass_check"]["relative_errors"]]
    verdicts["mass_pair"] = max(errors) <= rtol
    residuals = [abs(ohtsuka_suzuki_check(float(r["m_plus"]), float(r["m_minus"])))
                 for r in results]
    verdicts["ohtsuka_suzuki"] = residuals[-1] < thresholds.get("ohtsuka_suzuki", 1e-2)
    verdicts["phi_bound"] = max(float(v) for v in payload["phi_bound"]) < thresholds.get("phi_bound", 10.0)
    if len(results) > 1:
        farfield = [float(r["farfield_gap"]) for r in results]
        verdicts["farfield_monotone"] = all(b < a for a, b in zip(farfield, farfield[1:]))
        verdicts["ohtsuka_suzuki_decreasing"] = all(b <= a for a, b in zip(residuals, residuals[1:]))
    return verdicts


# ========================================
# LIMIT CHECKS
# ========================================

def _run_limit_checks(config: RunConfig) -> Dict[str, Any]:
    functions = random_radial_functions(5, seed=config.seed)

    def one(alpha):
        bounds = [stereographic_gradient_bounds(alpha, fn.derivative) for fn in functions]
        return {
            "alpha": alpha,
            "mass": limit_mass(alpha),
            "kernel_integrals": list(kernel_integrals(alpha)),
            "stereographic_ratios": [stereographic_norm_ratio(alpha, fn) for fn in functions],
            "gradient_bounds": [[b.lower, b.value, b.upper] for b in bounds],
        }

    return {"seed": config.seed, "checks": parallel_map(one, list(config.alphas), config.workers)}


def _verdict_limit_checks(payload: Dict[str, Any], thresholds: Dict[str, float]) -> Dict[str, bool]:
    mass_rtol = thresholds.get("mass_rtol", 1e-8)
    kernel_atol = thresholds.get("kernel_atol", 1e-6)
    ratio_tol = thresholds.get("stereographic_tol", 1e-8)
    verdicts = {}
    for check in payload["checks"]:
        alpha = float(check["alpha"])
        tag = f"alpha{alpha:g}"
        expected_mass = 4.0 * math.pi * alpha
        verdicts[f"mass_{tag}"] = abs(float(check["mass"]) - expected_mass) <= mass_rtol * expected_mass
        expected = (0.0, -4.0 * math.pi * alpha, -4.0 * math.pi)
        verdicts[f"kernel_{tag}"] = all(abs(float(v) - e) <= kernel_atol
                                        for v, e in zip(check["kernel_integrals"], expected))
        verdicts[f"stereographic_{tag}"] = all(abs(float(v) - alpha / 2.0) <= ratio_tol
                                               for v in check["stereographic_ratios"])
        slack = 1e-9
        verdicts[f"gradient_{tag}"] = all(
            float(lo) - slack * max(1.0, abs(float(v))) <= float(v)
            <= float(hi) + slack * max(1.0, abs(float(v)))
            for lo, v, hi in check["gradient_bounds"])
    return verdicts


RUNNERS: Dict[str, Callable[[RunConfig], Dict[str, Any]]] = {
    ExperimentKinds.PARAMS: _run_params,
    ExperimentKinds.ANSATZ: _run_ansatz,
    ExperimentKinds.RESIDUAL_SCAN: _run_residual_scan,
    ExperimentKinds.LINEAR_SPECTRUM: _run_linear_spectrum,
    ExperimentKinds.SOLVE: _run_solve,
    ExperimentKinds.LIMIT_CHECKS: _run_limit_checks,
}

VERDICTS: Dict[str, Callable[[Dict[str, Any], Dict[str, float]], Dict[str, bool]]] = {
    ExperimentKinds.PARAMS: _verdict_params,
    ExperimentKinds.ANSATZ: _verdict_ansatz,
    ExperimentKinds.RESIDUAL_SCAN: _verdict_residual_scan,
    ExperimentKinds.LINEAR_SPECTRUM: _verdict_linear_spectrum,
    ExperimentKinds.SOLVE: _verdict_solve,
    ExperimentKinds.LIMIT_CHECKS: _verdict_limit_checks,
}


def recompute_verdicts(record: RunRecord) -> Dict[str, bool]:
    """Verdicts from a stored payload and the thresholds stored with it"""
    return VERDICTS[record.kind](record.payload, record.thresholds)


def run(config: RunConfig, registry: Optional[Registry] = None) -> RunRecord:
    """
    Execute one experiment and persist its record.

    Execution errors propagate and leave the registry untouched; a failed
    scientific check still produces a record with the failing verdicts.
    """
    started = utc_timestamp()
    thresholds = load_thresholds(config.thresholds).get(config.kind, {})
    logger.info(f"🚀 Running {config.kind} (k={config.k}, {len(config.lambdas)} lambda values)")
    payload = to_jsonable(RUNNERS[config.kind](config))
    verdicts = {name: bool(v) for name, v in VERDICTS[config.kind](payload, thresholds).items()}
    echo = to_jsonable(config.to_dict())
    record = RunRecord(config.kind, echo, input_hash(echo), started, utc_timestamp(), payload,
                       verdicts, thresholds)
    for name, ok in verdicts.items():
        if not ok:
            logger.warning(f"❌ Check {name} failed")
    if registry is not None:
        registry.write(record)
    logger.info(f"{'✅' if record.passed else '❌'} {config.kind}: "
                f"{sum(verdicts.values())}/{len(verdicts)} checks passed")
    return record
