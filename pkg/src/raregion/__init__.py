"""Verification and construction tools for real algebraic regions."""
from .geometry import Box, Tolerances
from .poly import Polynomial, parse, to_text
from .region import CylinderSurface, RegionSpec, check_definition1, classify_boundary, find_critical

__all__ = ["Box", "Tolerances", "Polynomial", "parse", "to_text", "CylinderSurface", "RegionSpec",
           "check_definition1", "classify_boundary", "find_critical"]
