"""Capacity expansion planning with a-priori and a-posteriori time series aggregation."""

__version__ = "0.1.0"
