"""Entity disambiguation for short texts driven by knowledge-base user interests."""

__version__ = "0.1.0"
