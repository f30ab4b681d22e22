"""Attention-driven hierarchical tile streaming for 360-degree video."""

__version__ = "0.1.0"
