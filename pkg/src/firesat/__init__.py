"""Constellation design, fire classification and edge-latency modelling for on-orbit bushfire detection."""

__version__ = "0.1.0"
