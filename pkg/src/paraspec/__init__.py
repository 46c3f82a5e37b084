"""Numerical experiments on spectral type for parabolic flows and Furstenberg-type maps."""
__version__ = "0.1.0"
