"""ABC model choice for the latent dependency graph of hidden Potts fields."""
__version__ = "0.1.0"
