"""geoprog: parse, execute, verify and augment plane-geometry solution programs."""

__version__ = "0.1.0"
