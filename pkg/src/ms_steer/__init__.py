"""Inference-time steering of structure diffusion with mass-spectrometry restraints."""

__version__ = "0.1.0"
