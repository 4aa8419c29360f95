"""Two-party cryptography without quantum memory: protocol simulator and bound checks."""

__version__ = "0.1.0"
