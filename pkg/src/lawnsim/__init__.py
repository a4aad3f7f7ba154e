"""Topology-aware coordination simulator for low-altitude wireless networks."""

__version__ = "0.1.0"
