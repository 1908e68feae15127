"""Topological recursion on genus-zero spectral curves and its Virasoro constraints."""

__version__ = "0.1.0"
