"""Killed random walk among power-law renewal obstacles."""

__version__ = "0.1.0"
