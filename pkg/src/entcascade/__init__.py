"""Cascading entity classification over Bitcoin-style transaction ledgers."""

__version__ = "0.1.0"
