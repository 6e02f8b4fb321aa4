"""Constrained Bayesian optimization of variable-size design-space problems."""

__version__ = "0.1.0"
