"""Benchmark of adaptive agents for SLO compliance on a simulated video-streaming client."""

__version__ = "0.1.0"
