"""memtraj: conditional quantum trajectories through a lossy memory mode.

Two independent integrators for the same continuously monitored system --
an exact joint-state route that keeps the intermediate mode, and a reduced
density-matrix route that replaces it with memory functions -- plus a CLI
that cross-validates them on shared noise realizations.
"""

__version__ = "0.1.0"
