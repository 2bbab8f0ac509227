"""Crisis message relatedness classification across languages and hazard domains."""

__version__ = "0.1.0"
