"""Importance-weighted adversarial training of action samplers for planning."""

__version__ = "0.1.0"
