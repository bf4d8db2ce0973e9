"""Synthetic training-data pipeline and evaluation harness for
low-resource-language small language models."""

__version__ = "0.1.0"
