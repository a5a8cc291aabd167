"""Numerical laboratory for the singularly perturbed GUE at the soft edge."""
__version__ = "0.1.0"
