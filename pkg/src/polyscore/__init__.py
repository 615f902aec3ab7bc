"""Multilingual sentence-level speech scoring from phone-level features."""

__version__ = "0.1.0"
