"""Flexible variational information bottleneck for classification."""

__version__ = "0.1.0"
