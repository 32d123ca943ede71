"""Scorer service implementing the /score wire protocol over real or stub models."""

__version__ = "0.1.0"
