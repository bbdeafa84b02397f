"""Distilling a domain-randomized AMP walking expert into diffusion policies."""

__version__ = "0.1.0"
