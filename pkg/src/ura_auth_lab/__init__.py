"""MAC-based identification and authentication on unsourced random access."""

__version__ = "0.1.0"
