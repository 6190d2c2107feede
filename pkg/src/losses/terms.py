"""
Training losses for the fixer.

Norms are mean-reduced over pixels and channels so values do not depend on
resolution. Batched inputs (B, 3, H, W) are averaged over the batch.
"""

from dataclasses import dataclass

import torch

from src.errors import DomainError, ShapeMismatchError
from src.losses.extractor import FeatureExtractor
from src.models.config_types import LossWeights


def _check_shapes(pred: torch.Tensor, target: torch.Tensor) -> None:
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"prediction {tuple(pred.shape)} and target {tuple(target.shape)} differ")


def safe_sqrt(x: torch.Tensor) -> torch.Tensor:
    """sqrt with a zero gradient at zero."""
    positive = x > 0
    return torch.where(positive, torch.sqrt(torch.where(positive, x, torch.ones_like(x))), torch.zeros_like(x))


def _batched(x: torch.Tensor) -> torch.Tensor:
    return x.unsqueeze(0) if x.dim() == 3 else x


def recon_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """sqrt(mean((pred - target)²)) per image, averaged over the batch."""
    _check_shapes(pred, target)
    diff = _batched(pred) - _batched(target)
    return safe_sqrt((diff**2).flatten(1).mean(dim=1)).mean()


def gram_matrix(features: torch.Tensor, normalize: bool = True) -> torch.Tensor:
    """
    Channel auto-correlation of (B, C, H, W) or (C, H, W) features.

    Features are flattened spatially to (N, C) and G = φᵀφ, divided by N when
    `normalize` is set.
    """
    phi = _batched(features).flatten(2)
    gram = phi @ phi.transpose(1, 2)
    if normalize:
        gram = gram / phi.shape[-1]
    return gram if features.dim() == 4 else gram[0]


def perceptual_loss(pred: torch.Tensor, target: torch.Tensor, extractor: FeatureExtractor) -> torch.Tensor:
    """(1/L) Σ_l α_l · mean |φ_l(pred) - φ_l(target)|."""
    _check_shapes(pred, target)
    feats_pred, feats_target = extractor.paired_features(pred, target)
    total = pred.new_zeros(())
    for alpha, fp, ft in zip(extractor.layer_weights, feats_pred, feats_target, strict=True):
        total = total + alpha * (fp - ft).abs().mean()
    return total / extractor.n_layers


def gram_loss(pred: torch.Tensor, target: torch.Tensor, extractor: FeatureExtractor) -> torch.Tensor:
    """(1/L) Σ_l β_l · ‖G_l(pred) - G_l(target)‖_F, averaged over the batch."""
    _check_shapes(pred, target)
    feats_pred, feats_target = extractor.paired_features(pred, target)
    total = pred.new_zeros(())
    for beta, fp, ft in zip(extractor.gram_weights, feats_pred, feats_target, strict=True):
        diff = gram_matrix(fp) - gram_matrix(ft)
        total = total + beta * safe_sqrt((diff**2).sum(dim=(-2, -1))).mean()
    return total / extractor.n_layers


@dataclass
class LossBreakdown:
    total: torch.Tensor
    recon: torch.Tensor
    perceptual: torch.Tensor
    gram: torch.Tensor

    def as_floats(self) -> dict[str, float]:
        return {name: float(getattr(self, name).detach()) for name in ("total", "recon", "perceptual", "gram")}


def _as_weights(weights) -> LossWeights:
    if isinstance(weights, LossWeights):
        return weights
    recon, perceptual, gram = weights
    if min(recon, perceptual, gram) < 0:
        raise DomainError(f"loss weights must be non-negative, got {tuple(weights)}")
    return LossWeights(recon=recon, perceptual=perceptual, gram=gram)


def total_loss(
    pred: torch.Tensor,
    target: torch.Tensor,
    extractor: FeatureExtractor,
    weights: LossWeights | tuple[float, float, float] | None = None,
) -> LossBreakdown:
    """w_r·recon + w_p·perceptual + w_g·gram with the components for logging."""
    weights = _as_weights(weights if weights is not None else LossWeights())
    recon = recon_loss(pred, target)
    perceptual = perceptual_loss(pred, target, extractor)
    gram = gram_loss(pred, target, extractor)
    total = weights.recon * recon + weights.perceptual * perceptual + weights.gram * gram
    return LossBreakdown(total=total, recon=recon, perceptual=perceptual, gram=gram)
