"""Sliced NOMA V2V broadcast simulator with a deep-Q scheduler and offline baselines."""

__version__ = "0.1.0"
