"""Decompose generalized measurements into random walks of weak measurements."""

__version__ = "0.1.0"
