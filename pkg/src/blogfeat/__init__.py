"""Unsupervised feature learning (PCA with Gap-statistic selection, sparse
autoencoder) as preprocessing for blog feedback regression."""

__version__ = "0.1.0"
