"""Pulse-level Monte Carlo: compiled kernel with a numpy fallback."""
from .backend import ACTIVE as BACKEND, KERNELS
from .engine import (ClickRecord, ClickStream, ResourceLimitError, SimulationConfig,
                     read_binary, read_csv, simulate, simulate_batch_parallel,
                     write_binary, write_csv)

__all__ = [
    "BACKEND", "KERNELS", "ClickRecord", "ClickStream", "ResourceLimitError",
    "SimulationConfig", "read_binary", "read_csv", "simulate", "simulate_batch_parallel",
    "write_binary", "write_csv",
]
