"""Wavelet-domain image enhancement with a channel-attention transformer."""

__version__ = "0.1.0"
