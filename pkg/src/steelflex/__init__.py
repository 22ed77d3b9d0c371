"""Demand-response scheduling for hydrogen-based DRI-EAF steel plants with methanol co-production."""

__version__ = "0.1.0"
