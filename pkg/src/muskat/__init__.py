"""One-phase vessel flow with moving contact points.

Stationary meniscus solve, Darcy free-surface evolution with surface
tension and a linear contact-point law, and a numerical audit of the
associated energy-dissipation identities.
"""
from .backend import backend_name
from .core import PhysParams, VesselGeometry

__all__ = ["PhysParams", "VesselGeometry", "backend_name"]
__version__ = "0.1.0"
