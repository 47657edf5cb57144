"""Optimal audit policies for principal-agent audit games."""

__version__ = "0.1.0"
