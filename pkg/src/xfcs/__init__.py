"""Planning toolkit for extreme-fast-charging stations: demand, sizing, robustness, analysis."""

__version__ = "0.1.0"
