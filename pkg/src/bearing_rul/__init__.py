"""Bearing remaining-useful-life prediction toolkit."""

__version__ = "0.1.0"
