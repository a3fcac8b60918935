"""Evaluation toolkit for document-level machine translation."""

__version__ = "0.1.0"
