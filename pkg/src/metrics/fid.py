"""
Fréchet distance between Gaussian fits of two feature sets.

Features are global-average-pooled activations of the shared extractor, so values
are comparable across runs of this project only.
"""

import numpy as np
import scipy.linalg
import torch

from src.errors import DomainError
from src.losses.extractor import FeatureExtractor

COVARIANCE_EPS = 1e-6


def image_features(images: torch.Tensor | list[torch.Tensor], extractor: FeatureExtractor) -> np.ndarray:
    """(N, sum of stage widths) pooled features for a stack or list of (3, H, W) images."""
    if isinstance(images, list):
        images = torch.stack(images)
    with torch.no_grad():
        stages = extractor(images.to(torch.float64))
        pooled = torch.cat([f.mean(dim=(2, 3)) for f in stages], dim=1)
    return pooled.numpy()


def _moments(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 2:
        raise DomainError(f"FID needs at least 2 feature vectors per set, got shape {features.shape}")
    if not np.all(np.isfinite(features)):
        raise DomainError("FID features contain non-finite values")
    mu = features.mean(axis=0)
    cov = np.atleast_2d(np.cov(features, rowvar=False)) + COVARIANCE_EPS * np.eye(features.shape[1])
    return mu, cov


def _sqrtm_psd(matrix: np.ndarray) -> np.ndarray:
    values, vectors = scipy.linalg.eigh(0.5 * (matrix + matrix.T))
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T


def frechet_distance(mu_a: np.ndarray, cov_a: np.ndarray, mu_b: np.ndarray, cov_b: np.ndarray) -> float:
    """‖μ_a - μ_b‖² + Tr(Σ_a + Σ_b - 2 (Σ_a^½ Σ_b Σ_a^½)^½)."""
    root_a = _sqrtm_psd(cov_a)
    product = root_a @ cov_b @ root_a
    eigenvalues = scipy.linalg.eigh(0.5 * (product + product.T), eigvals_only=True)
    trace_sqrt = float(np.sum(np.sqrt(np.clip(eigenvalues, 0.0, None))))
    diff = mu_a - mu_b
    value = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * trace_sqrt)
    return max(value, 0.0)


def fid(features_a: np.ndarray, features_b: np.ndarray) -> float:
    mu_a, cov_a = _moments(features_a)
    mu_b, cov_b = _moments(features_b)
    return frechet_distance(mu_a, cov_a, mu_b, cov_b)
