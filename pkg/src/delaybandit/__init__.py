"""Bandit online learning with unknown feedback delays."""

__version__ = "0.1.0"
