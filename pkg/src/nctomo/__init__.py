"""Topology inference with network-coded probes."""

__version__ = "0.1.0"
