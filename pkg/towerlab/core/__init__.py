"""
Core functionality for towerlab: exceptions, validation and the log-radial mesh
"""

from .exceptions import TowerLabError, InvalidParameterError
from .mesh import RadialMesh, RadialField

__all__ = ["TowerLabError", "InvalidParameterError", "RadialMesh", "RadialField"]
