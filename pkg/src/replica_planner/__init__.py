"""
replica-planner: availability-driven replication, weighted placement and data-loss analysis
for heterogeneous PC-cluster storage.
"""

__all__ = ["__version__"]
__version__ = "0.1.0"
