"""Adaptive Multilevel Splitting with exact resampling and analytic oracles."""

__version__ = "0.1.0"
