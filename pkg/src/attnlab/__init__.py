"""attnlab: a desk-scale workbench for finding, validating, and injecting
attention patterns in small extractive summarizers."""

__version__ = "0.1.0"
