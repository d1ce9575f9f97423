"""Traversing flows, tangency patterns, and the topology of their stratifications."""

__version__ = "0.1.0"
