"""
Gaussian cloud rendered by per-ray depth-sorted evaluation.

Every particle contributes at the point of maximum response along a ray, with
alpha = eta * exp(-m²/2) where m is the Mahalanobis distance between that point and
the particle center. Particles further than 3 sigma from the ray or behind the
camera are culled.
"""

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from src.scene.base import DEFAULT_BACKGROUND, RayBundle, SceneRepresentation
from src.scene.compositing import compositing_weights

SCALE_FLOOR = 1e-4
COVARIANCE_EPS = 1e-10
CULL_SIGMA = 3.0
NEAR_PLANE = 1e-3


@dataclass(frozen=True)
class GaussianParticle:
    """One particle: position, unit quaternion (w, x, y, z), scale, opacity, color."""

    mean: np.ndarray
    rotation: np.ndarray
    scale: np.ndarray
    opacity: float
    color: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.opacity <= 1.0:
            raise ValueError(f"opacity must be in [0, 1], got {self.opacity}")
        if np.any(np.asarray(self.scale) <= 0):
            raise ValueError(f"scales must be positive, got {self.scale}")

    def precision(self) -> np.ndarray:
        R = _quaternion_to_matrix(torch.as_tensor(np.asarray(self.rotation, dtype=np.float64))[None])[0].numpy()
        s2 = np.maximum(np.asarray(self.scale, dtype=np.float64), SCALE_FLOOR) ** 2
        return R @ np.diag(1.0 / (s2 + COVARIANCE_EPS)) @ R.T

    def covariance(self) -> np.ndarray:
        R = _quaternion_to_matrix(torch.as_tensor(np.asarray(self.rotation, dtype=np.float64))[None])[0].numpy()
        return R @ np.diag(np.asarray(self.scale, dtype=np.float64) ** 2) @ R.T


def gaussian_alpha(particle: GaussianParticle, point) -> float:
    """eta * exp(-(p - mu)ᵀ Σ⁻¹ (p - mu) / 2), with an epsilon-regularized inverse."""
    diff = np.asarray(point, dtype=np.float64) - np.asarray(particle.mean, dtype=np.float64)
    m2 = float(diff @ particle.precision() @ diff)
    return float(particle.opacity * np.exp(-0.5 * m2))


def _quaternion_to_matrix(q: torch.Tensor) -> torch.Tensor:
    q = q / q.norm(dim=-1, keepdim=True)
    w, x, y, z = q.unbind(-1)
    return torch.stack(
        [
            1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
            2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
            2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
        ],
        dim=-1,
    ).reshape(*q.shape[:-1], 3, 3)  # fmt: skip


class GaussianCloud(SceneRepresentation):
    """Anisotropic Gaussian particles with unconstrained raw parameters."""

    kind = "gaussian_cloud"

    def __init__(
        self,
        means: torch.Tensor,
        rotations: torch.Tensor,
        log_scales: torch.Tensor,
        opacity_logits: torch.Tensor,
        color_logits: torch.Tensor,
    ):
        super().__init__()
        self.means = nn.Parameter(means)
        self.rotations = nn.Parameter(rotations)
        self.log_scales = nn.Parameter(log_scales)
        self.opacity_logits = nn.Parameter(opacity_logits)
        self.color_logits = nn.Parameter(color_logits)

    def __len__(self) -> int:
        return self.means.shape[0]

    @classmethod
    def empty(cls, dtype: torch.dtype = torch.float32) -> "GaussianCloud":
        return cls(
            torch.zeros(0, 3, dtype=dtype),
            torch.zeros(0, 4, dtype=dtype),
            torch.zeros(0, 3, dtype=dtype),
            torch.zeros(0, dtype=dtype),
            torch.zeros(0, 3, dtype=dtype),
        )

    @classmethod
    def from_particles(cls, particles: list[GaussianParticle], dtype: torch.dtype = torch.float32) -> "GaussianCloud":
        if not particles:
            return cls.empty(dtype)

        def stack(attr):
            return torch.as_tensor(np.stack([np.asarray(getattr(p, attr), dtype=np.float64) for p in particles]), dtype=dtype)

        opacity = torch.as_tensor([p.opacity for p in particles], dtype=dtype).clamp(1e-6, 1 - 1e-6)
        return cls(
            stack("mean"),
            stack("rotation"),
            torch.log(stack("scale")),
            torch.logit(opacity),
            torch.logit(stack("color").clamp(1e-6, 1 - 1e-6)),
        )

    def particle(self, index: int) -> GaussianParticle:
        with torch.no_grad():
            q = self.rotations[index] / self.rotations[index].norm()
            return GaussianParticle(
                mean=self.means[index].double().numpy(),
                rotation=q.double().numpy(),
                scale=self.scales()[index].double().numpy(),
                opacity=float(self.opacity()[index]),
                color=self.colors()[index].double().numpy(),
            )

    def scales(self) -> torch.Tensor:
        return torch.exp(self.log_scales).clamp_min(SCALE_FLOOR)

    def opacity(self) -> torch.Tensor:
        return torch.sigmoid(self.opacity_logits)

    def colors(self) -> torch.Tensor:
        return torch.sigmoid(self.color_logits)

    def rotation_matrices(self) -> torch.Tensor:
        return _quaternion_to_matrix(self.rotations)

    def precision(self) -> torch.Tensor:
        """Σ⁻¹ = R diag(1 / (s² + eps)) Rᵀ, always symmetric positive-definite."""
        R = self.rotation_matrices()
        inv = 1.0 / (self.scales() ** 2 + COVARIANCE_EPS)
        return R @ torch.diag_embed(inv) @ R.transpose(-1, -2)

    def bounding_box(self, margin_sigma: float = CULL_SIGMA):
        with torch.no_grad():
            reach = margin_sigma * self.scales().amax(dim=-1, keepdim=True)
            lo = (self.means - reach).amin(dim=0).tolist()
            hi = (self.means + reach).amax(dim=0).tolist()
        return tuple(lo), tuple(hi)

    def render_rays(self, rays: RayBundle, background: float = DEFAULT_BACKGROUND):
        n = len(rays)
        if len(self) == 0:
            zeros = rays.origins.new_zeros(n)
            return rays.origins.new_full((n, 3), background), zeros, zeros

        P = self.precision()
        d = rays.directions
        diff = self.means.unsqueeze(0) - rays.origins.unsqueeze(1)
        Pd = torch.einsum("mkl,rl->rmk", P, d)
        a = (Pd * d.unsqueeze(1)).sum(-1)
        b = (Pd * diff).sum(-1)
        c = torch.einsum("rmk,mkl,rml->rm", diff, P, diff)
        t_star = b / a
        m2 = (c - b * b / a).clamp_min(0.0)

        visible = (m2 <= CULL_SIGMA**2) & (t_star > NEAR_PLANE)
        alphas = self.opacity().unsqueeze(0) * torch.exp(-0.5 * m2) * visible

        order = torch.argsort(t_star.detach(), dim=-1)
        alphas = torch.gather(alphas, 1, order)
        t_sorted = torch.gather(t_star, 1, order)
        colors = self.colors()[order]

        weights = compositing_weights(alphas)
        acc = weights.sum(dim=-1)
        color = (weights.unsqueeze(-1) * colors).sum(dim=-2) + (1.0 - acc).unsqueeze(-1) * background
        cos = (d * rays.forward).sum(dim=-1)
        depth = (weights * torch.where(visible.gather(1, order), t_sorted, torch.zeros_like(t_sorted))).sum(dim=-1) * cos
        return color, depth, acc

    def checkpoint_state(self):
        blocks = {
            "means": self.means.detach(),
            "rotations": self.rotations.detach(),
            "log_scales": self.log_scales.detach(),
            "opacity_logits": self.opacity_logits.detach(),
            "color_logits": self.color_logits.detach(),
        }
        return {"count": len(self)}, blocks


def gaussians_from_points(points, colors, scale: float = 0.05, opacity: float = 0.5, dtype: torch.dtype = torch.float32) -> GaussianCloud:
    """Isotropic particles at the given (N, 3) points, e.g. back-projected ground-truth depth."""
    points = torch.as_tensor(np.asarray(points, dtype=np.float64), dtype=dtype)
    colors = torch.as_tensor(np.asarray(colors, dtype=np.float64), dtype=dtype)
    n = points.shape[0]
    rotations = torch.zeros(n, 4, dtype=dtype)
    rotations[:, 0] = 1.0
    return GaussianCloud(
        points.clone(),
        rotations,
        torch.full((n, 3), float(np.log(scale)), dtype=dtype),
        torch.full((n,), float(np.log(opacity / (1.0 - opacity))), dtype=dtype),
        torch.logit(colors.clamp(1e-4, 1 - 1e-4)),
    )
