"""Contrastive test-suite harness for meta-evaluating text-to-image metrics."""

__version__ = "0.1.0"
