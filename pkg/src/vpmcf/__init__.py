"""Simulator and verification lab for the volume-preserving mean curvature flow in H^{n+1}."""

__version__ = "0.1.0"
