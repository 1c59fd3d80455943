"""Algorithmic variance estimation for randomized ensembles"""

__version__ = "0.1.0"
