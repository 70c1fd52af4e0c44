"""Heterogeneous contract graphs and metapath attention for smart-contract bug detection."""

__version__ = "0.1.0"
