"""Planar two-robot cooperative transport with staged privileged-information MARL."""

__version__ = "0.1.0"
