"""Simulation of a path-to-OAM entanglement interface built on a reversed log-polar mode sorter."""

__version__ = "0.1.0"
