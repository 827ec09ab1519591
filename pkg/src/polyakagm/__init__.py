"""Polyak-step gradient methods, accelerated variants with Polyak momentum,
one-step worst-case analysis and proof-certificate checks."""

__version__ = "0.1.0"
