"""Shared-CPU vRAN simulator and learned core-activation orchestrator."""

__version__ = "0.1.0"
