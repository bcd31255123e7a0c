"""Depth-image local planner built on quintic motion primitives and a pixel-level safety shield."""

__version__ = "0.1.0"
