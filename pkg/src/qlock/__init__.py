"""Obfuscation of quantum circuits with random reversible blocks."""
__version__ = "0.1.0"
