"""Desk-scale two-stage image-to-video pipeline with segment-wise,
anchor-conditioned denoising and a streaming decode runtime."""

__version__ = "0.1.0"
