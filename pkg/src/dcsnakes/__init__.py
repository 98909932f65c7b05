"""Cusp-free geodesic tracking and snake segmentation on the projective line bundle."""

__version__ = "0.1.0"
