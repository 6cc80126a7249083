"""Geodesics, Jacobi fields and conjugate loci of compact Liouville manifolds."""

from .manifold import AProfile, Manifold, base_point, general_base_point, validate_spec

__version__ = "0.1.0"

__all__ = ["AProfile", "Manifold", "base_point", "general_base_point", "validate_spec"]
