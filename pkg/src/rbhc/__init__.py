"""Relaxed Bayesian hierarchical clustering with exponential-family dissimilarities."""

__version__ = "0.1.0"
