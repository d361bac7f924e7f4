"""Simulation, noisy sampling, error protection and grid layout for IQP circuits."""

__version__ = "0.1.0"
