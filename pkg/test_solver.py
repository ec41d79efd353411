#!/usr/bin/env python3
"""Test the correction solvers and the conclusions drawn from their solutions"""

import math

import numpy as np
import pytest

from towerlab.core.exceptions import DomainError, InvalidParameterError
from towerlab.core.mesh import RadialField, RadialMesh
from towerlab.greens import DomainSpec
from towerlab.solver import (ContinuationSweep, contraction_iterate, continuation_sweep,
                             convergence_order, count_sign_changes, energy_norm,
                             farfield_compare, farfield_target, mass_pair_check, masses,
                             moser_trudinger_spot_check, newton_solve, ohtsuka_suzuki_check,
                             solve_tower)
from towerlab.testing import random_radial_functions
from towerlab.tower import assemble_ansatz, select_parameters
from towerlab.utils.constants import SolverMethods


@pytest.fixture
def unit_mesh():
    return RadialMesh(-10.0, 0.0, 10 * 64)


@pytest.fixture(scope="module")
def single_bubble():
    return solve_tower(1, 1e-3, method=SolverMethods.BOTH)


def test_convergence_order():
    assert convergence_order([1e-1, 1e-2, 1e-4, 1e-8]) == pytest.approx(2.0)
    assert math.isnan(convergence_order([1e-1, 1e-14, 0.0]))


def test_ohtsuka_suzuki_identity():
    assert ohtsuka_suzuki_check(0.0, 8 * math.pi) == pytest.approx(0.0, abs=1e-14)
    assert ohtsuka_suzuki_check(8 * math.pi, 24 * math.pi) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(InvalidParameterError):
        ohtsuka_suzuki_check(0.0, 0.0)


def test_mass_pair_labels():
    check = mass_pair_check((0.1, 8 * math.pi), 1, rtol=0.02)
    assert check.passed
    assert check.labels == {"m_plus": 0.0, "m_minus": 8 * math.pi}
    assert not mass_pair_check((4 * math.pi, 4 * math.pi), 1).passed


def test_sign_changes(unit_mesh):
    values = np.cos(3.0 * math.pi * unit_mesh.r)
    assert count_sign_changes(RadialField(unit_mesh, values)) == 3
    assert count_sign_changes(RadialField(unit_mesh, np.zeros(unit_mesh.size))) == 0


def test_energy_norm_of_paraboloid(unit_mesh):
    u = RadialField(unit_mesh, 1.0 - unit_mesh.r ** 2)
    assert energy_norm(u) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-3)


def test_moser_trudinger_spot_check(unit_mesh):
    check = moser_trudinger_spot_check(RadialField(unit_mesh, np.zeros(unit_mesh.size)), 1.0)
    assert check.log_lhs == pytest.approx(math.log(math.pi), rel=1e-3)
    assert check
    for fn in random_radial_functions(3, seed=2):
        assert moser_trudinger_spot_check(fn.on_mesh(unit_mesh), 2.0).holds


def test_masses_of_zero(unit_mesh):
    lam = 1e-3
    zero = RadialField(unit_mesh, np.zeros(unit_mesh.size))
    m_plus, m_minus = masses(zero, lam, r_cut=0.5)
    assert m_plus == pytest.approx(lam * math.pi * 0.25, rel=1e-3)
    assert m_minus == pytest.approx(m_plus)


def test_masses_reject_cut_inside_core(unit_mesh):
    zero = RadialField(unit_mesh, np.zeros(unit_mesh.size))
    with pytest.raises(InvalidParameterError):
        masses(zero, 1e-3, r_cut=1e-4, log_delta_outer=math.log(1e-3))
    with pytest.raises(InvalidParameterError):
        masses(zero, 1e-3, r_cut=2.0)


def test_farfield_target_sign():
    r = np.array([0.5])
    assert farfield_target(1, DomainSpec.disk(), r)[0] == pytest.approx(4.0 * math.log(0.5))
    assert farfield_target(2, DomainSpec.disk(), r)[0] == pytest.approx(-8.0 * math.log(0.5))


def test_farfield_rejects_bad_annulus(unit_mesh):
    zero = RadialField(unit_mesh, np.zeros(unit_mesh.size))
    with pytest.raises(InvalidParameterError):
        farfield_compare(zero, 1, DomainSpec.disk(), compact_annulus=(0.5, 1.5))


def test_newton_from_zero_finds_trivial_solution(unit_mesh):
    zero = RadialField(unit_mesh, np.zeros(unit_mesh.size))
    result = newton_solve(DomainSpec.disk(), 1e-3, zero)
    assert result.iterations == 0
    assert np.all(result.u.values == 0.0)


def test_affine_contraction_is_one_solve():
    ansatz = assemble_ansatz(select_parameters(1, 1e-3))
    result = contraction_iterate(ansatz, include_nonlinear=False, include_linear_error=False)
    assert result.iterations <= 2
    assert result.contraction_ratio == 0.0


def test_paths_agree(single_bubble):
    assert single_bubble.method == SolverMethods.BOTH
    assert single_bubble.path_gap < 1e-8
    assert single_bubble.contraction_ratio < 0.5


def test_single_bubble_masses(single_bubble):
    check = mass_pair_check(single_bubble.masses, 1, rtol=0.02)
    assert check.passed
    m_plus, m_minus = single_bubble.masses
    assert m_plus < m_minus
    assert abs(ohtsuka_suzuki_check(m_plus, m_minus)) < 1e-2


def test_single_bubble_shape(single_bubble):
    assert count_sign_changes(single_bubble.u) == 0
    assert single_bubble.farfield_gap < 0.1
    assert ContinuationSweep(1, [single_bubble]).phi_bound()[0] < 10.0
    row = single_bubble.profile_rows()[-1]
    assert set(row) == {"r", "u", "W", "phi"}
    assert row["u"] == 0.0


def test_solver_needs_a_disk():
    with pytest.raises(DomainError):
        solve_tower(1, 1e-3, domain=DomainSpec.rectangle(grid_points=65))


def test_continuation_farfield_improves():
    sweep = continuation_sweep(1, [1e-5, 1e-3, 1e-4])
    assert sweep.lambdas == [1e-3, 1e-4, 1e-5]
    assert sweep.farfield_monotone()
    assert all(abs(v) < 1e-2 for v in sweep.ohtsuka_suzuki())


@pytest.fixture(scope="module")
def two_bubble_sweep():
    return continuation_sweep(2, [1e-3, 1e-4, 1e-5])


def test_two_bubble_masses(two_bubble_sweep):
    result = two_bubble_sweep.results[-1]
    check = mass_pair_check(result.masses, 2, rtol=0.05)
    assert check.passed
    assert check.expected == pytest.approx((8 * math.pi, 24 * math.pi))
    assert all(abs(v) < 1e-2 for v in two_bubble_sweep.ohtsuka_suzuki())


def test_two_bubble_shape(two_bubble_sweep):
    for result in two_bubble_sweep.results:
        assert count_sign_changes(result.u) == 1
    assert two_bubble_sweep.farfield_monotone()


def test_two_bubble_farfield_target():
    r = np.array([0.4, 0.5, 0.8])
    assert farfield_target(2, DomainSpec.disk(), r) == pytest.approx(-8.0 * np.log(r), rel=1e-12)
    assert farfield_target(1, DomainSpec.disk(), r) == pytest.approx(4.0 * np.log(r), rel=1e-12)


def test_single_bubble_masses_small_lambda():
    result = solve_tower(1, 1e-5)
    check = mass_pair_check(result.masses, 1, rtol=0.02)
    assert check.passed
    assert check.labels == {"m_plus": 0.0, "m_minus": 8 * math.pi}


def test_newton_converges_quadratically(single_bubble):
    u0 = RadialField(single_bubble.u.mesh, 1.05 * single_bubble.u.values)
    result = newton_solve(DomainSpec.disk(), 1e-3, u0)
    assert result.iterations >= 3
    assert convergence_order(result.history, floor=1e-9) >= 1.8
