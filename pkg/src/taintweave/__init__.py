"""Dynamic taint tracking through partial instrumentation of a small class-based IR."""

__version__ = "0.1.0"
