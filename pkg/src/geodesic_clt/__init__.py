"""Gaussian fluctuations of smooth eigenvalue counts on the modular surface."""

__version__ = "0.1.0"
