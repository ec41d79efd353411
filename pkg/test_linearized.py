#!/usr/bin/env python3
"""Test the linearized operator, its spectrum and the projected kernel"""

import math

import numpy as np
import pytest
from scipy.sparse.linalg import ArpackError

from towerlab.core.exceptions import DomainError, InvalidParameterError, LinearSolveError
from towerlab.core.mesh import RadialField, RadialMesh
from towerlab.greens import DomainSpec
from towerlab.linearized import (build_limit_operator, build_operator, default_modes,
                                 discretization_floor,
                                 kernel_overlap, min_singular_sweep, mode_forms,
                                 operator_from_potential, smallest_eigenpair, solve, spectrum_at,
                                 z_projection_check)
from towerlab.tower import default_mesh, select_parameters


@pytest.fixture
def unit_mesh():
    return RadialMesh(-8.0, 0.0, 8 * 64)


def test_forms_are_symmetric(unit_mesh):
    params = select_parameters(1, 1e-3)
    mesh = default_mesh(params, DomainSpec.disk())
    operator = build_operator(params, mesh, 2)
    assert operator.is_symmetric()
    stiffness, mass = mode_forms(unit_mesh, 3)
    assert abs(stiffness - stiffness.T).max() == 0.0
    assert np.all(mass > 0)


def test_mode_restrictions():
    params = select_parameters(1, 1e-3)
    mesh = default_mesh(params, DomainSpec.disk())
    with pytest.raises(InvalidParameterError):
        build_operator(params, mesh, 1, symmetric=True)
    with pytest.raises(InvalidParameterError):
        build_operator(params, mesh, 6, symmetric=False)
    assert default_modes(params, symmetric=True) == [0, 2, 4]
    assert default_modes(params, symmetric=False) == [0, 1, 2, 3, 4]


def test_poisson_mode_zero(unit_mesh):
    # -Laplace(1 - r^2) = 4
    operator = operator_from_potential(unit_mesh, 0, np.zeros(unit_mesh.size))
    solution = solve(operator, np.full(unit_mesh.size, 4.0))
    assert np.max(np.abs(solution.phi.values - (1.0 - unit_mesh.r ** 2))) < 5e-3
    assert solution.energy_norm == pytest.approx(math.sqrt(2 * math.pi), rel=1e-2)


def test_poisson_mode_two(unit_mesh):
    # r^2 - r^4 has mode-2 Laplacian -12 r^2
    operator = operator_from_potential(unit_mesh, 2, np.zeros(unit_mesh.size))
    solution = solve(operator, 12.0 * unit_mesh.r ** 2)
    expected = unit_mesh.r ** 2 - unit_mesh.r ** 4
    assert np.max(np.abs(solution.phi.values - expected)) < 5e-3


def test_solve_rejects_bad_data(unit_mesh):
    operator = operator_from_potential(unit_mesh, 0, np.zeros(unit_mesh.size))
    with pytest.raises(InvalidParameterError):
        solve(operator, np.full(unit_mesh.size, np.nan))
    with pytest.raises(InvalidParameterError):
        solve(operator, np.ones(4))


def test_even_sector_sigma_scales_with_log_lambda():
    for lam in (1e-3, 1e-5):
        (point,) = spectrum_at(1, lam, modes=[0])
        assert 0.2 < point.scaled < 5.0


def test_full_sector_collapses():
    lam = 1e-4
    even = min(p.sigma_min for p in spectrum_at(1, lam, symmetric=True))
    full = min(p.sigma_min for p in spectrum_at(1, lam, symmetric=False))
    assert full / even < 0.05


def test_even_band_over_sweep():
    sweep = min_singular_sweep(1, [1e-2, 1e-3, 1e-4], modes=[0])
    assert sweep.passed
    assert len(sweep.rows()) == 3
    assert set(sweep.sigma_by_lambda()) == {1e-2, 1e-3, 1e-4}


def test_limit_operator_near_kernel():
    mesh = RadialMesh(-12.0, 12.0, 24 * 32)
    operator = build_limit_operator(2.0, mesh, 0)
    sigma, vector = smallest_eigenpair(operator)
    assert 0.0 < abs(sigma) * mesh.s_max < 10.0
    assert kernel_overlap(2.0, vector, mesh) > 0.9


def test_spectrum_needs_a_disk():
    with pytest.raises(DomainError):
        spectrum_at(1, 1e-3, domain=DomainSpec.rectangle(grid_points=65))


def test_projected_kernel_on_disk():
    log_delta = math.log(1e-2)
    projection = z_projection_check(2.0, log_delta)
    assert projection.constant == pytest.approx(2.0, rel=1e-3)
    assert isinstance(projection.field, RadialField)
    assert projection.at(1.0) == pytest.approx(0.0, abs=1e-15)


def test_projected_kernel_rejects_large_scale():
    with pytest.raises(InvalidParameterError):
        z_projection_check(2.0, 0.5)


def test_two_bubble_even_band():
    sweep = min_singular_sweep(2, [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    assert sweep.passed
    assert sweep.band_ratio() <= 5.0
    assert len(sweep.sigma_by_lambda()) == 5


def test_two_bubble_full_sector_sits_far_below_even():
    lam = 1e-4
    even = min(p.sigma_min for p in spectrum_at(2, lam, symmetric=True))
    full = min(p.sigma_min for p in spectrum_at(2, lam, symmetric=False))
    assert full / even < 0.05


def test_full_sector_floor_under_refinement():
    lam = 1e-4
    even = min(p.sigma_min for p in spectrum_at(1, lam, symmetric=True))
    floor = discretization_floor(1, lam)
    assert floor.density == DomainSpec.disk().radial_density
    assert floor.factor == 2.0
    assert floor.sigma_min / even < 0.05
    assert floor.sigma_min_refined / even < 0.5
    row = floor.to_dict()
    assert row["refinement_ratio"] == pytest.approx(floor.sigma_min_refined / floor.sigma_min)


def test_arpack_failure_raises(monkeypatch):
    params = select_parameters(1, 1e-3)
    operator = build_operator(params, default_mesh(params, DomainSpec.disk()), 0)

    def failing_eigsh(*args, **kwargs):
        raise ArpackError(-9999)

    monkeypatch.setattr("towerlab.linearized.eigsh", failing_eigsh)
    with pytest.raises(LinearSolveError):
        smallest_eigenpair(operator)


def test_singular_shift_invert_gives_zero(monkeypatch, caplog):
    params = select_parameters(1, 1e-3)
    operator = build_operator(params, default_mesh(params, DomainSpec.disk()), 0)

    def singular_eigsh(*args, **kwargs):
        raise RuntimeError("Factor is exactly singular")

    monkeypatch.setattr("towerlab.linearized.eigsh", singular_eigsh)
    sigma, vector = smallest_eigenpair(operator)
    assert sigma == 0.0
    assert not np.any(vector)
    assert "singular" in caplog.text
