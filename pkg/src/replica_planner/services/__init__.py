"""Replication policy, reliability, metrics and simulation services."""
