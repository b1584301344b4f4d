"""Verification lab for sharp Hardy-Littlewood-Sobolev inequalities on the
quaternionic Heisenberg group and the quaternionic sphere."""

__version__ = "0.1.0"

from .group import GroupParams, GroupPoint
from .sphere import ConformalMap, SpherePoint
from .spectral import EigenIndex

__all__ = ["GroupParams", "GroupPoint", "SpherePoint", "ConformalMap", "EigenIndex", "__version__"]
