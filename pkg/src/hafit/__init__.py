"""Noise-specific hearing-aid fitting through a differentiable hearing-loss model."""

__version__ = "0.1.0"
