"""Heterogeneous-network embedding, staleness-aware aggregation and team identification."""

__version__ = "0.1.0"
