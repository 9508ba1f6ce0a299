"""Diffusion over multivariate Bernoulli latent codes."""

__version__ = "0.1.0"
