"""Spatial competitive coevolution for a one-dimensional GAN minimax game."""

__version__ = "0.1.0"
