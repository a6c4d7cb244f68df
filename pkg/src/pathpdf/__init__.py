"""Non-Gaussian path-integral densities for stock log-returns."""

__version__ = "0.1.0"
