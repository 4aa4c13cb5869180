"""Executable model of a linear-capability machine."""

__version__ = "0.1.0"
