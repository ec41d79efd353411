#!/usr/bin/env python3
"""Test parameter selection, the tower ansatz and the interaction function"""

import math

import numpy as np
import pytest

from towerlab.core.exceptions import AsymptoticRegimeWarning, InvalidParameterError, ResolutionError
from towerlab.core.mesh import RadialMesh
from towerlab.greens import DomainSpec
from towerlab.tower import (annulus_decomposition, assemble_ansatz, check_alternating_sum,
                            exponent_identity, parameter_table, project_bubble,
                            scale_balance, select_parameters, theta, theta_certificate,
                            theta_spread, ThetaCertificate)
from towerlab.utils.constants import ProjectionModes


def test_single_bubble_scale():
    params = select_parameters(1, 1e-4)
    assert params.alpha == (2,)
    assert params.delta[0] == pytest.approx(math.sqrt(1e-4 / 8.0), rel=1e-12)


def test_two_bubble_scales():
    lam = 1e-3
    params = select_parameters(2, lam)
    assert params.alpha == (2, 6)
    assert params.exponents == pytest.approx((1.5, 1.0 / 6.0))
    assert params.delta[0] == pytest.approx(lam ** 1.5 / (72.0 * math.sqrt(8.0)), rel=1e-10)
    assert params.delta[1] == pytest.approx((lam / 72.0) ** (1.0 / 6.0), rel=1e-10)
    assert params.delta[0] < params.delta[1]


def test_deep_tower_stays_finite():
    params = select_parameters(5, 1e-6)
    assert np.all(np.isfinite(params.log_delta))
    assert all(b > a for a, b in zip(params.log_delta[:-1], params.log_delta[1:]))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
@pytest.mark.parametrize("h00", [0.0, 0.05])
def test_balance_conditions(k, h00):
    params = select_parameters(k, 1e-3, h00=h00)
    for j in range(1, k + 1):
        assert abs(scale_balance(params, j)) < 1e-9


def test_d_independent_of_lambda():
    a = select_parameters(3, 1e-2)
    b = select_parameters(3, 1e-5)
    assert np.allclose(a.log_d, b.log_d, rtol=0, atol=1e-10)


def test_exponent_identities():
    for k in range(1, 6):
        assert check_alternating_sum(select_parameters(k, 1e-3)) == (-1) ** k * 2 * k
    assert all(exponent_identity(j) == 0 for j in range(1, 8))


def test_parameter_table_rows():
    rows = parameter_table(select_parameters(2, 1e-3))
    assert [row["i"] for row in rows] == [1, 2]
    assert rows[1]["alpha"] == 6


def test_robin_shifts():
    params = select_parameters(2, 1e-3, h00=0.05)
    assert params.h_values == pytest.approx((0.4 * math.pi, 1.2 * math.pi))
    assert select_parameters(2, 1e-3).h_values == (0.0, 0.0)


def test_invalid_parameters():
    with pytest.raises(InvalidParameterError):
        select_parameters(0, 1e-3)
    with pytest.raises(InvalidParameterError):
        select_parameters(1, -1.0)
    with pytest.warns(AsymptoticRegimeWarning):
        select_parameters(1, 2.0)


def test_annuli_between_scales():
    params = select_parameters(2, 1e-3)
    decomposition = annulus_decomposition(params)
    assert decomposition.radii[0] == 0.0
    assert decomposition.radii[1] == pytest.approx(math.sqrt(params.delta[0] * params.delta[1]))
    assert decomposition.radii[-1] == 1.0
    assert list(decomposition.index_of(np.array([params.delta[0], params.delta[1]]))) == [1, 2]


def test_projected_bubble_on_disk():
    domain = DomainSpec.disk(radius=2.0)
    mesh = RadialMesh(-6.0, math.log(2.0), 400)
    log_delta = math.log(0.1)
    exact = project_bubble(domain, 2.0, log_delta, mesh=mesh)
    asymptotic = project_bubble(domain, 2.0, log_delta, ProjectionModes.ASYMPTOTIC, mesh=mesh)
    assert exact.values[-1] == pytest.approx(0.0, abs=1e-12)
    assert asymptotic.values[-1] == pytest.approx(-2.0 * math.log1p(0.0025), rel=1e-9)
    with pytest.raises(InvalidParameterError):
        project_bubble(domain, 2.0, math.log(2.0), mesh=mesh)


def test_exact_ansatz_vanishes_on_boundary():
    ansatz = assemble_ansatz(select_parameters(2, 1e-3), DomainSpec.disk())
    assert ansatz.boundary_value() < 1e-12
    assert ansatz.evenness_defect() == 0.0
    # the outer bubble is positive, so W is positive at its core
    assert ansatz.W.at(ansatz.params.delta[1] * 0.1) > 0


def test_asymptotic_projection_close_to_exact():
    params = select_parameters(2, 1e-3)
    exact = assemble_ansatz(params, DomainSpec.disk())
    approx = assemble_ansatz(params, DomainSpec.disk(), ProjectionModes.ASYMPTOTIC, mesh=exact.mesh)
    assert np.max(np.abs(exact.W.values - approx.W.values)) < 1e-2


def test_coarse_mesh_rejected():
    params = select_parameters(1, 1e-3)
    coarse = RadialMesh(params.log_delta[0] - 2.0, 0.0, 5)
    with pytest.raises(ResolutionError):
        assemble_ansatz(params, DomainSpec.disk(), mesh=coarse)


def test_single_bubble_theta_is_order_lambda():
    lam = 1e-3
    params = select_parameters(1, lam)
    value = theta(params, 1, 0.5, DomainSpec.disk())
    assert value == pytest.approx(2.0 * math.log1p(lam / 8.0), rel=1e-8)


def test_theta_certificate_single_bubble():
    certificate = theta_certificate(1, [1e-2, 1e-3, 1e-4])
    assert certificate.passed
    assert certificate.constants()[1] == pytest.approx(0.25, rel=0.05)


def test_theta_certificate_two_bubbles():
    certificate = theta_certificate(2, [1e-2, 1e-3, 1e-4, 1e-5])
    assert certificate.passed
    assert all(ratio < 2.0 for ratio in certificate.ratios().values())
    rows = certificate.rows()
    assert len(rows) == 8
    assert {row["j"] for row in rows} == {1, 2}
    assert all(row["ratio"] == certificate.ratios()[row["j"]] for row in rows)


def test_theta_certificate_three_bubbles_spread():
    certificate = theta_certificate(3, [1e-2, 1e-3, 1e-4, 1e-5])
    values = certificate.required[3]
    assert values == sorted(values, reverse=True)
    assert certificate.ratios()[3] > 10.0
    assert not certificate.verdicts()[3]
    assert not certificate.passed


def test_theta_verdict_rejects_falling_constant():
    falling = ThetaCertificate(1, [1e-2, 1e-3, 1e-4], {1: [1.0, 0.6, 0.1]}, {1: [0.0, 0.0, 0.0]})
    assert falling.ratios()[1] == pytest.approx(10.0)
    assert not falling.passed
    steady = ThetaCertificate(1, [1e-2, 1e-3, 1e-4], {1: [1.0, 1.5, 0.9]}, {1: [0.0, 0.0, 0.0]})
    assert steady.passed


def test_theta_spread_edge_cases():
    assert theta_spread([0.3]) == 1.0
    assert theta_spread([0.0, 0.0]) == 1.0
    assert math.isinf(theta_spread([0.0, 0.1]))
    assert theta_spread([0.2, 0.1, 0.4]) == pytest.approx(4.0)
