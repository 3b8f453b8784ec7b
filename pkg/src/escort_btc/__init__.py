"""Escort evolutionary dynamics for constrained, distributed power allocation
in a building thermal network, with a distributed interior-point baseline."""

__version__ = "0.1.0"
