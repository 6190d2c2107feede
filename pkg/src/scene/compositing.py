"""
Alpha compositing along rays.

Samples are ordered front to back on the last axis; transmittance before sample i is
T_i = prod_{j<i} (1 - alpha_j).
"""

import math

import torch

from src.errors import DomainError, ShapeMismatchError


def field_alpha(sigma, delta):
    """Opacity of a ray segment of length delta through density sigma: 1 - exp(-sigma * delta)."""
    if isinstance(sigma, torch.Tensor) or isinstance(delta, torch.Tensor):
        sigma_t = torch.as_tensor(sigma)
        delta_t = torch.as_tensor(delta, dtype=sigma_t.dtype)
        if bool((sigma_t < 0).any()) or bool((delta_t <= 0).any()):
            raise DomainError("field_alpha needs sigma >= 0 and delta > 0")
        return -torch.expm1(-sigma_t * delta_t)
    if sigma < 0 or delta <= 0:
        raise DomainError(f"field_alpha needs sigma >= 0 and delta > 0, got sigma={sigma}, delta={delta}")
    return -math.expm1(-sigma * delta)


def compositing_weights(alphas: torch.Tensor) -> torch.Tensor:
    """Per-sample weights alpha_i * T_i."""
    ones = torch.ones_like(alphas[..., :1])
    transmittance = torch.cumprod(torch.cat([ones, 1.0 - alphas[..., :-1]], dim=-1), dim=-1)
    return alphas * transmittance


def composite(alphas: torch.Tensor, colors: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """
    Front-to-back compositing.

    Args:
        alphas: (..., S) opacities in [0, 1]
        colors: (..., S, C) per-sample colors

    Returns:
        (color (..., C), accumulation (...)). An empty sample axis gives zeros.
    """
    if colors.shape[:-1] != alphas.shape:
        raise ShapeMismatchError(f"alphas {tuple(alphas.shape)} and colors {tuple(colors.shape)} disagree")
    if alphas.shape[-1] == 0:
        return colors.new_zeros(colors.shape[:-2] + colors.shape[-1:]), alphas.new_zeros(alphas.shape[:-1])
    weights = compositing_weights(alphas)
    return (weights.unsqueeze(-1) * colors).sum(dim=-2), weights.sum(dim=-1)
