"""Latent diffusion for DNA sequence generation: codec, VAE, latent DDPM, metrics."""

__version__ = "0.1.0"
