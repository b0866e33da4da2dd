"""Synthetic data with known structure, used by tests and the scripts/ experiments."""

from __future__ import annotations

import numpy as np


def random_orthonormal(p: int, k: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((p, k)))
    return q * np.sign(np.diag(r))


def planted_rank2(seed: int, n: int = 500, p: int = 20, signal_var: float = 100.0,
                  noise_var: float = 0.01) -> np.ndarray:
    """Two planted components of sample variance exactly ``signal_var`` plus isotropic noise.

    The latent scores are whitened so the planted directions carry equal,
    uncorrelated variance in the sample itself, not only in expectation.
    Directions are a random orthonormal pair in R^p.
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 2))
    z -= z.mean(axis=0)
    cov = z.T @ z / (n - 1)
    z = z @ np.linalg.inv(np.linalg.cholesky(cov)).T * np.sqrt(signal_var)
    A = random_orthonormal(p, 2, rng)
    return z @ A.T + rng.normal(0.0, np.sqrt(noise_var), size=(n, p))


def planted_factor_regression(seed: int, n: int = 100, p: int = 20, noise_sd: float = 0.5,
                              target_noise_sd: float = 0.1):
    """Raw table (features then target) for a 2-factor linear response.

    Observed features are noisy mixtures of two latent factors and the target is
    linear in the factors, so projecting onto the two leading components
    removes most of the feature noise an unrestricted regression would fit.
    Loadings are random signs so every feature has the same variance; column
    standardisation then keeps the feature noise isotropic.
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 2))
    A = rng.choice([-1.0, 1.0], size=(2, p))
    X = z @ A + rng.normal(0.0, noise_sd, size=(n, p))
    y = z @ np.array([1.5, -2.0]) + rng.normal(0.0, target_noise_sd, size=n)
    return np.column_stack([X, y])
