"""Escape rates and survivor-set dimensions for open symbolic and conformal systems."""
__version__ = "0.1.0"
