"""Bias analysis for WANET topology generators."""

__version__ = "0.1.0"
