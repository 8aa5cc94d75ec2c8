"""From-scratch Swin Transformer art-authentication pipeline."""

__version__ = "0.1.0"
