"""Figure suite for solver run directories: CSV in, images out."""

__version__ = "0.1.0"
