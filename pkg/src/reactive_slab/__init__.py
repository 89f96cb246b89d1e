"""Discrete-velocity solver for stationary reactive BGK problems in a slab."""

__version__ = "0.1.0"
