#!/usr/bin/env python3
"""Test error fields, L^p norms and scaling fits"""

import math

import numpy as np
import pytest

from towerlab.core.exceptions import DomainError, InvalidParameterError, NumericalOverflowError
from towerlab.core.mesh import RadialField, RadialMesh
from towerlab.greens import DomainSpec
from towerlab.residual import (lambda_exp, lambda_sinh, lambda_sinh_prime, linear_error,
                               linear_error_field, lp_norm, mechanism_breakdown, nonlinear_term,
                               nonlinear_values,
                               predicted_exponent, residual_field, residual_sweep, scaling_fit)
from towerlab.tower import Ansatz, annulus_decomposition, assemble_ansatz, select_parameters


def test_shifted_exponentials():
    u = np.linspace(-5.0, 5.0, 11)
    log_lam = math.log(1e-3)
    assert np.allclose(lambda_sinh(log_lam, u), 2e-3 * np.sinh(u), rtol=1e-12, atol=0)
    assert np.allclose(lambda_sinh_prime(log_lam, u), 2e-3 * np.cosh(u), rtol=1e-12)


def test_large_exponent_kept_finite():
    # lambda e^u with u = 710 overflows unless ln(lambda) goes into the exponent
    value = lambda_exp(math.log(1e-10), np.array([710.0]))
    assert np.isfinite(value[0])
    with pytest.raises(NumericalOverflowError):
        lambda_exp(0.0, np.array([800.0]))


def test_nonlinear_term_is_quadratic():
    log_lam = math.log(1e-2)
    W = np.array([0.3])
    assert nonlinear_values(log_lam, W, np.array([0.0]))[0] == 0.0
    phi = 1e-4
    expected = 1e-2 * 2.0 * math.sinh(0.3) * phi ** 2 / 2.0
    assert nonlinear_values(log_lam, W, np.array([phi]))[0] == pytest.approx(expected, rel=1e-3)


def test_nonlinear_term_on_ansatz():
    ansatz = assemble_ansatz(select_parameters(1, 1e-3))
    phi = 1e-3 * (1.0 - ansatz.mesh.r ** 2)
    small = nonlinear_term(ansatz, phi)
    assert np.all(nonlinear_term(ansatz, np.zeros(ansatz.mesh.size)).values == 0.0)
    doubled = nonlinear_term(ansatz, RadialField(ansatz.mesh, 2.0 * phi))
    ratio = doubled.values[1:-1] / small.values[1:-1]
    assert np.allclose(ratio, 4.0, rtol=1e-2)
    with pytest.raises(InvalidParameterError):
        nonlinear_term(ansatz, np.full(ansatz.mesh.size, np.inf))


def test_linear_error_without_bubbles():
    lam = 1e-3
    values = linear_error(math.log(lam), np.zeros(4), np.zeros(4))
    assert np.allclose(values, 2.0 * lam)


def test_lp_norm_annuli_consistent():
    ansatz = assemble_ansatz(select_parameters(2, 1e-3), DomainSpec.disk())
    report = lp_norm(residual_field(ansatz), 1.0, ansatz.decomposition())
    assert report.total_norm > 0
    assert report.consistency_defect() <= 1e-10 * report.total_norm
    assert [j for j, _ in report.per_annulus] == [1, 2]


def test_lp_norm_rejects_p_below_one():
    mesh = RadialMesh(-5.0, 0.0, 100)
    decomposition = annulus_decomposition(select_parameters(1, 1e-2))
    with pytest.raises(InvalidParameterError):
        lp_norm(RadialField(mesh, np.ones(mesh.size)), 0.5, decomposition)


def test_fields_need_a_disk():
    params = select_parameters(1, 1e-2)
    mesh = RadialMesh(-10.0, 0.0, 640)
    zero = RadialField(mesh, np.zeros(mesh.size))
    ansatz = Ansatz(params, DomainSpec.rectangle(grid_points=65), "exact", mesh, (zero,), zero)
    with pytest.raises(DomainError):
        residual_field(ansatz)
    with pytest.raises(DomainError):
        linear_error_field(ansatz)


def test_mechanism_parts_sum_to_residual():
    ansatz = assemble_ansatz(select_parameters(2, 1e-3), DomainSpec.disk())
    for row in mechanism_breakdown(ansatz):
        assert row.split_defect < 1e-8


def test_predicted_exponent():
    assert predicted_exponent(1.0, 1) == pytest.approx(0.5)
    assert predicted_exponent(1.0, 2) == pytest.approx(1.0 / 6.0)


def test_scaling_fit_recovers_slope():
    lambdas = [1e-2, 1e-3, 1e-4, 1e-5]
    fit = scaling_fit(lambdas, [3.0 * lam ** 0.5 for lam in lambdas], 0.5)
    assert fit.exponent_fitted == pytest.approx(0.5, abs=1e-10)
    assert fit.passed


def test_scaling_fit_needs_a_real_sweep():
    with pytest.raises(InvalidParameterError):
        scaling_fit([1e-2, 1e-3, 1e-4], [1.0, 0.5, 0.2], 0.5)
    with pytest.raises(InvalidParameterError):
        scaling_fit([1e-2, 5e-3, 2e-3, 1e-3], [1.0, 0.9, 0.8, 0.7], 0.5)


def test_single_bubble_residual_decays():
    sweep = residual_sweep(1, [1e-2, 1e-3, 1e-4, 1e-5], p=1.0)
    assert sweep.residual_fit.passed
    assert sweep.linear_fit.passed
    assert sweep.residual_fit.exponent_fitted > 0.45


def test_two_bubble_residual_decays():
    sweep = residual_sweep(2, list(np.geomspace(1e-2, 1e-6, 6)), p=1.0)
    assert len(sweep.lambdas) == 6
    assert sweep.residual_fit.exponent_predicted == pytest.approx(1.0 / 6.0)
    assert sweep.residual_fit.passed
    assert sweep.linear_fit.passed
