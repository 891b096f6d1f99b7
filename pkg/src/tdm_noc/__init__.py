"""Cycle-level simulator and design-space explorer for a TDM fat-tree NoC."""

__version__ = "0.1.0"
