"""Randomized sampling and sketching algorithms for dense linear algebra."""

__version__ = "0.1.0"
