"""Optimal quantum error-correcting subspace codes via Riemannian optimization."""

__version__ = "0.1.0"
