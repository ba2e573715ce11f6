"""Distributed secure genomic-data analysis on a simulated QKD key fabric."""

__version__ = "0.1.0"
