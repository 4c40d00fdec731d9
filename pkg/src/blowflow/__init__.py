"""Numerical toolkit for self-similar blowup in the equivariant
harmonic-map heat flow from flat space or the sphere into the sphere.

Subpackages and modules are imported lazily by the callers that need
them; importing blowflow itself stays cheap (no numba compilation).
"""

__version__ = "0.1.0"
