"""Tree representations of determinantal point processes on dyadic partitions."""

__version__ = "0.1.0"
