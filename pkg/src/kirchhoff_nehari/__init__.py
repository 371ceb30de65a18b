"""Nehari-manifold solver for a singular Kirchhoff double-phase problem on a
rectangle, discretized with P1 finite elements."""

from .params import PINNED, ProblemParams, validate
from .space import GridFunction, Mesh, WeightField

__version__ = "0.1.0"

__all__ = ["PINNED", "ProblemParams", "validate", "GridFunction", "Mesh", "WeightField"]
