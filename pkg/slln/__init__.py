"""Sub-linear expectations, capacities and strong laws of large numbers."""

__version__ = "1.0.0"
