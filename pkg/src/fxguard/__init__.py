"""Bit-exact fixed-point arithmetic with overflow-freedom analysis."""

__version__ = "0.1.0"
