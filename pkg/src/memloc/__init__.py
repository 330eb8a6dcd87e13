"""Trace-driven memory locality toolkit.

Generates synthetic access traces for neighbour/tree style kernels,
reorders datasets and computations for row-buffer locality, filters
traces through a cache hierarchy with prefetch models, and simulates
a DDR4-style DRAM with FR-FCFS-Cap scheduling.
"""

__version__ = "0.1.0"
