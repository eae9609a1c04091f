"""Polynomial configurations, character sums, Gowers norms, and PET induction
over finite commutative rings."""

__version__ = "0.1.0"
