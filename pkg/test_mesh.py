#!/usr/bin/env python3
"""Test RadialMesh quadrature and RadialField arithmetic"""

import math

import numpy as np
import pytest

from towerlab.core.exceptions import InvalidParameterError, ResolutionError
from towerlab.core.mesh import RadialField, RadialMesh


@pytest.fixture
def mesh():
    return RadialMesh(-12.0, 0.0, 12 * 64)


def test_disc_area(mesh):
    assert mesh.integrate(np.ones(mesh.size)) == pytest.approx(math.pi, rel=1e-3)


def test_annuli_add_up(mesh):
    values = 1.0 / (1e-4 + mesh.r ** 2)
    total = mesh.integrate(values)
    cut = 3.7e-2
    inner = mesh.integrate(values, r_max=cut)
    outer = mesh.integrate(values, r_min=cut)
    assert inner + outer == pytest.approx(total, rel=1e-12)


def test_quadrature_error_is_small_for_smooth_data(mesh):
    values = 1.0 - mesh.r ** 2
    assert mesh.quadrature_error(values) < 1e-3 * mesh.integrate(values)


def test_for_scales_reaches_below_delta():
    log_delta = math.log(1e-3)
    m = RadialMesh.for_scales(log_delta, radius=2.0, density=32, margin=6.0)
    assert m.s_min == pytest.approx(log_delta - 6.0)
    assert m.radius == pytest.approx(2.0)
    assert m.covers(1e-3)


def test_refined_doubles_intervals(mesh):
    fine = mesh.refined()
    assert fine.intervals == 2 * mesh.intervals
    assert np.allclose(fine.r[::2], mesh.r)


def test_invalid_extent():
    with pytest.raises(InvalidParameterError):
        RadialMesh(0.0, -1.0, 10)


def test_require_resolution():
    coarse = RadialMesh(-10.0, 0.0, 10)
    with pytest.raises(ResolutionError):
        coarse.require_resolution(8, "coarse")


def test_field_arithmetic(mesh):
    a = RadialField(mesh, np.ones(mesh.size))
    b = RadialField(mesh, mesh.r)
    assert np.allclose((a - b).values, 1.0 - mesh.r)
    assert np.allclose((2.0 * a).values, 2.0)
    assert (a + b).at(1.0) == pytest.approx(2.0)
    assert (-b).sup() == pytest.approx(1.0)


def test_fields_on_different_meshes(mesh):
    other = RadialMesh(-12.0, 0.0, 100)
    with pytest.raises(InvalidParameterError):
        RadialField(mesh, np.ones(mesh.size)) + RadialField(other, np.ones(other.size))


def test_field_shape_checked(mesh):
    with pytest.raises(InvalidParameterError):
        RadialField(mesh, np.ones(3))
