"""Benchmarking toolkit for image forgery detection methods."""

__version__ = "0.1.0"
