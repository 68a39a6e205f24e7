"""Hybrid homogenization and shape optimization for multi-state diffusion."""

__version__ = "0.1.0"
