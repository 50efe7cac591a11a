"""Reference-free evaluation engine for deep-research reports."""

__version__ = "0.1.0"
