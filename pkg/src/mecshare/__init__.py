"""Cooperative resource sharing and allocation simulator for edge clouds."""

__version__ = "0.1.0"
