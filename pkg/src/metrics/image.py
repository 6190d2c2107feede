"""
Full-reference image metrics: PSNR, SSIM and the LPIPS-proxy perceptual distance.

Masks are boolean (H, W); an all-true mask goes through the same code path as no
mask, so masked and unmasked values agree exactly.
"""

import math

import torch
import torch.nn.functional as F

from src.errors import DomainError, ShapeMismatchError
from src.losses.extractor import FeatureExtractor

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
K1, K2 = 0.01, 0.03


def _prepare(pred: torch.Tensor, target: torch.Tensor, mask: torch.Tensor | None) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"prediction {tuple(pred.shape)} and target {tuple(target.shape)} differ")
    if pred.dim() != 3:
        raise ShapeMismatchError(f"images must be (C, H, W), got {tuple(pred.shape)}")
    pred = pred.detach().to(torch.float64)
    target = target.detach().to(torch.float64)
    if mask is None:
        mask = torch.ones(pred.shape[1:], dtype=torch.bool)
    elif tuple(mask.shape) != tuple(pred.shape[1:]):
        raise ShapeMismatchError(f"mask {tuple(mask.shape)} does not match image {tuple(pred.shape[1:])}")
    return pred, target, mask.to(torch.bool)


def psnr(pred: torch.Tensor, target: torch.Tensor, mask: torch.Tensor | None = None, max_value: float = 1.0) -> float:
    """10·log10(MAX² / MSE) over unmasked pixels; +inf when the MSE is zero."""
    pred, target, mask = _prepare(pred, target, mask)
    if not bool(mask.any()):
        raise DomainError("mask selects no pixels")
    mse = float(((pred - target) ** 2)[:, mask].mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value**2 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA, dtype: torch.dtype = torch.float64) -> torch.Tensor:
    coords = torch.arange(size, dtype=dtype) - (size - 1) / 2.0
    g = torch.exp(-(coords**2) / (2 * sigma**2))
    g = g / g.sum()
    return torch.outer(g, g)


def ssim(pred: torch.Tensor, target: torch.Tensor, mask: torch.Tensor | None = None, max_value: float = 1.0) -> float:
    """Gaussian-windowed SSIM averaged over channels and over windows centered on unmasked pixels."""
    pred, target, mask = _prepare(pred, target, mask)
    channels, height, width = pred.shape
    if height < SSIM_WINDOW or width < SSIM_WINDOW:
        raise DomainError(f"image {height}x{width} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")

    window = gaussian_window().expand(channels, 1, SSIM_WINDOW, SSIM_WINDOW)

    def filt(x):
        return F.conv2d(x.unsqueeze(0), window, groups=channels)[0]

    c1 = (K1 * max_value) ** 2
    c2 = (K2 * max_value) ** 2
    mu_x, mu_y = filt(pred), filt(target)
    sigma_x = filt(pred * pred) - mu_x**2
    sigma_y = filt(target * target) - mu_y**2
    sigma_xy = filt(pred * target) - mu_x * mu_y
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * sigma_xy + c2)) / ((mu_x**2 + mu_y**2 + c1) * (sigma_x + sigma_y + c2))

    half = SSIM_WINDOW // 2
    centers = mask[half : height - half, half : width - half]
    if not bool(centers.any()):
        raise DomainError("mask leaves no complete SSIM window")
    return float(ssim_map.mean(dim=0)[centers].mean())


def perceptual_distance(pred: torch.Tensor, target: torch.Tensor, extractor: FeatureExtractor) -> float:
    """LPIPS-proxy: Σ_l mean((φ_l(pred) - φ_l(target))²)."""
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"prediction {tuple(pred.shape)} and target {tuple(target.shape)} differ")
    with torch.no_grad():
        feats_pred, feats_target = extractor.paired_features(pred.to(torch.float64), target.to(torch.float64))
        return float(sum(((fp - ft) ** 2).mean() for fp, ft in zip(feats_pred, feats_target, strict=True)))
