"""Simulator-free dialogue policy learning on a synthetic multi-domain benchmark."""

__version__ = "0.1.0"
