#!/usr/bin/env python3
"""Test Green's functions on the disk and the rectangle"""

import math

import numpy as np
import pytest

from towerlab.core.exceptions import DomainError, InvalidParameterError
from towerlab.greens import (DomainSpec, green_origin, green_profile_csv, harmonic_extension,
                             image_series_robin, robin_at_origin)
from towerlab.testing import random_even_boundary_data


def test_disk_green_closed_form():
    disk = DomainSpec.disk()
    assert green_origin(disk, (0.5, 0.0)) == pytest.approx(math.log(2.0) / (2 * math.pi))
    values = green_origin(disk, np.array([[1.0, 0.0], [0.0, 0.25]]))
    assert values[0] == pytest.approx(0.0, abs=1e-15)
    assert values[1] == pytest.approx(math.log(4.0) / (2 * math.pi))


def test_disk_robin():
    assert robin_at_origin(DomainSpec.disk(2.0)) == pytest.approx(math.log(2.0) / (2 * math.pi))
    assert robin_at_origin(DomainSpec.disk()) == 0.0


def test_pole_and_outside_points():
    disk = DomainSpec.disk()
    with pytest.raises(InvalidParameterError):
        green_origin(disk, (0.0, 0.0))
    with pytest.raises(DomainError):
        green_origin(disk, (2.0, 0.0))


def test_square_robin_matches_image_series():
    square = DomainSpec.rectangle(1.0, 1.0, grid_points=129)
    reference = image_series_robin(1.0, 1.0)
    assert reference == pytest.approx(0.01206, abs=1e-4)
    assert robin_at_origin(square) == pytest.approx(reference, abs=1e-6)


def test_even_grid_points_rejected():
    with pytest.raises(InvalidParameterError):
        DomainSpec.rectangle(grid_points=64)


def test_disk_extension_of_second_harmonic():
    disk = DomainSpec.disk()

    def data(px, py):
        return np.cos(2.0 * np.arctan2(py, px))

    field = harmonic_extension(disk, data)
    expected = field.r[:, None] ** 2 * np.cos(2.0 * field.theta[None, :])
    assert np.allclose(field.values, expected, atol=1e-12)


def test_odd_boundary_data_rejected():
    with pytest.raises(InvalidParameterError):
        harmonic_extension(DomainSpec.disk(), lambda px, py: px)


def test_rectangle_extension_stays_even():
    rect = DomainSpec.rectangle(1.0, 0.5, grid_points=65)
    field = harmonic_extension(rect, random_even_boundary_data(seed=4))
    assert field.evenness_defect() < 1e-9


def test_domain_round_trip():
    rect = DomainSpec.rectangle(2.0, 1.0, grid_points=33)
    assert DomainSpec.from_dict(rect.to_dict()) == rect
    assert DomainSpec.from_dict({"kind": "disk", "radius": 3.0}).inradius == 3.0


def test_green_profile_csv():
    text = green_profile_csv(DomainSpec.disk(), [0.25, 0.5])
    lines = text.strip().splitlines()
    assert lines[0] == "r,G,H"
    assert len(lines) == 3
