"""Conditional-autoencoder audio synthesizer with pitch-disentangled timbre latents."""

__version__ = "0.1.0"
