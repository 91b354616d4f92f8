"""Zero-shot pose recognition over a mixed classification/regression attribute space."""

__version__ = "0.1.0"
