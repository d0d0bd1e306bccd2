"""Asymmetric partial exclusion processes with decomposable rates.

Gradient/product-invariance classification, exact thermodynamics of the
product measures, brute-force oracles on small rings, an exact kinetic
Monte Carlo engine, and the fluctuation-field statistics of the
stochastic-Burgers scaling regime.
"""

__version__ = "0.1.0"

from .model import AsymmetryParams, Configuration, RateSpec

__all__ = ["AsymmetryParams", "Configuration", "RateSpec", "__version__"]
