"""Finite-difference laboratory for Ricci flow on manifolds with boundary.

The Ricci-DeTurck equation is integrated on a slab with torus fibres under
the boundary conditions W = 0, H = eta and [g^T] = [gamma]; the Ricci flow is
recovered by pulling back along the DeTurck diffeomorphisms.  A reduced
solver for rotationally symmetric balls, a symbol checker for the
complementing condition and compatibility checks complete the toolkit.
"""
from ._backend import backend_name
from .grid import Chart, SymTensorField, MetricField, DegenerateMetric

__version__ = "0.1.0"

__all__ = ["Chart", "SymTensorField", "MetricField", "DegenerateMetric", "backend_name",
           "__version__"]
