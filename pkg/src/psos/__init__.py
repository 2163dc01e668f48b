"""Desk-scale tools for the p-SOS model: exact oracles, Glauber dynamics, contours and experiments."""

__version__ = "0.1.0"
