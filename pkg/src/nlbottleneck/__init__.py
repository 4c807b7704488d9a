"""Finite-volume solver for traffic flow with a non-locally driven moving bottleneck."""

__version__ = "0.1.0"
