"""Atoms in an asymmetrically pumped ring-cavity optical lattice."""

__version__ = "0.1.0"
