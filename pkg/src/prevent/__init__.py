"""Hazard-aware behavior-tree skills and a simulated lab to exercise them."""

__version__ = "0.1.0"
