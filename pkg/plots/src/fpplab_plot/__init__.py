"""Figure rendering for fpplab CSV/JSON outputs."""

__version__ = "0.1.0"
