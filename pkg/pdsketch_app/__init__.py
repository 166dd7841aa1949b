"""
PDSketch toolkit application.

Parses PDSketch domain files, learns the blank (``??``) slots from trajectory
data, and plans with A* guided by relaxed-planning heuristics compiled from the
learned model. See the management commands for the command-line surface.
"""
