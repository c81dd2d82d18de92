"""Multi-objective mapping and cost simulation of layered neural workloads
on parametric multicore mesh hardware."""

__version__ = "0.1.0"
