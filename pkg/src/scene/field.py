"""
Voxel radiance field: trilinear density and color grids rendered by fixed-stride ray marching.
"""

import math

import torch
import torch.nn.functional as F
from torch import nn

from src.scene.base import DEFAULT_BACKGROUND, RayBundle, SceneRepresentation
from src.scene.compositing import compositing_weights

N_SAMPLES = 256
DENSITY_INIT = -5.0


class RadianceFieldGrid(SceneRepresentation):
    """
    Density and color on a regular grid over an axis-aligned box.

    Density is stored as a softplus pre-activation and color as logits, so any
    unconstrained gradient step keeps sigma >= 0 and colors in [0, 1]. Grids are laid
    out (C, z, y, x) to match `grid_sample`.
    """

    kind = "radiance_field"

    def __init__(
        self,
        bounds: tuple[tuple[float, float, float], tuple[float, float, float]],
        resolution: int = 64,
        dtype: torch.dtype = torch.float32,
    ):
        super().__init__()
        if resolution < 2:
            raise ValueError(f"resolution must be >= 2, got {resolution}")
        self.resolution = resolution
        self.register_buffer("bounds_min", torch.tensor(bounds[0], dtype=dtype))
        self.register_buffer("bounds_max", torch.tensor(bounds[1], dtype=dtype))
        shape = (resolution, resolution, resolution)
        self.density_raw = nn.Parameter(torch.full((1, *shape), DENSITY_INIT, dtype=dtype))
        self.color_logits = nn.Parameter(torch.zeros((3, *shape), dtype=dtype))

    @property
    def bounds(self) -> tuple[list[float], list[float]]:
        return self.bounds_min.tolist(), self.bounds_max.tolist()

    @property
    def step_size(self) -> float:
        """Ray-marching stride: box diagonal / 256."""
        return float(torch.linalg.norm(self.bounds_max - self.bounds_min)) / N_SAMPLES

    def density(self) -> torch.Tensor:
        return F.softplus(self.density_raw)

    def color(self) -> torch.Tensor:
        return torch.sigmoid(self.color_logits)

    def query(self, points: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Trilinear (sigma (N,), rgb (N, 3)) at world points; zero density outside the box."""
        normalized = 2.0 * (points - self.bounds_min) / (self.bounds_max - self.bounds_min) - 1.0
        grid = normalized.reshape(1, -1, 1, 1, 3)
        values = torch.cat([self.density(), self.color()], dim=0).unsqueeze(0)
        sampled = F.grid_sample(values, grid, mode="bilinear", padding_mode="zeros", align_corners=True)
        sampled = sampled.reshape(4, -1)
        return sampled[0], sampled[1:].T

    def _ray_box(self, rays: RayBundle) -> tuple[torch.Tensor, torch.Tensor]:
        safe = torch.where(rays.directions.abs() < 1e-12, torch.full_like(rays.directions, 1e-12), rays.directions)
        t0 = (self.bounds_min - rays.origins) / safe
        t1 = (self.bounds_max - rays.origins) / safe
        t_near = torch.minimum(t0, t1).amax(dim=-1).clamp_min(0.0)
        t_far = torch.maximum(t0, t1).amin(dim=-1)
        return t_near, t_far

    def render_rays(self, rays: RayBundle, background: float = DEFAULT_BACKGROUND):
        delta = self.step_size
        t_near, t_far = self._ray_box(rays)
        steps = (torch.arange(N_SAMPLES, dtype=rays.origins.dtype) + 0.5) * delta
        t = t_near.unsqueeze(-1) + steps
        inside = t < t_far.unsqueeze(-1)

        points = rays.origins.unsqueeze(1) + t.unsqueeze(-1) * rays.directions.unsqueeze(1)
        sigma, rgb = self.query(points.reshape(-1, 3))
        sigma = sigma.reshape(t.shape) * inside
        rgb = rgb.reshape(*t.shape, 3)

        alphas = -torch.expm1(-sigma * delta)
        weights = compositing_weights(alphas)
        acc = weights.sum(dim=-1)
        color = (weights.unsqueeze(-1) * rgb).sum(dim=-2) + (1.0 - acc).unsqueeze(-1) * background
        cos = (rays.directions * rays.forward).sum(dim=-1)
        depth = (weights * t).sum(dim=-1) * cos
        return color, depth, acc

    def checkpoint_state(self):
        metadata = {"resolution": self.resolution, "bounds": list(self.bounds)}
        return metadata, {"density_raw": self.density_raw.detach(), "color_logits": self.color_logits.detach()}


def _inverse_softplus(y: torch.Tensor) -> torch.Tensor:
    y = y.clamp_min(1e-6)
    return y + torch.log(-torch.expm1(-y))


def voxelize_gaussians(cloud, resolution: int, bounds=None) -> RadianceFieldGrid:
    """
    Resample a Gaussian cloud onto a radiance-field grid.

    Each particle becomes a density bump exp(-m²/2) scaled so that a ray through its
    center accumulates the particle's opacity; colors are density-weighted averages.
    """
    if bounds is None:
        bounds = cloud.bounding_box()
    dtype = cloud.dtype
    grid = RadianceFieldGrid(bounds, resolution=resolution, dtype=dtype)
    with torch.no_grad():
        lo, hi = grid.bounds_min, grid.bounds_max
        axes = [torch.linspace(float(lo[i]), float(hi[i]), resolution, dtype=dtype) for i in range(3)]
        zz, yy, xx = torch.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
        points = torch.stack([xx, yy, zz], dim=-1).reshape(-1, 3)

        precision = cloud.precision()
        scales = cloud.scales()
        eta = cloud.opacity()
        # Effective 1D width along a ray: geometric mean of the axis scales.
        width = scales.prod(dim=-1).pow(1.0 / 3.0)
        kappa = -torch.log1p(-eta.clamp(max=1.0 - 1e-6)) / (width * math.sqrt(2.0 * math.pi))

        sigma = torch.zeros(points.shape[0], dtype=dtype)
        weighted = torch.zeros(points.shape[0], 3, dtype=dtype)
        colors = cloud.colors()
        for i in range(len(cloud)):
            diff = points - cloud.means[i]
            m2 = torch.einsum("nk,kl,nl->n", diff, precision[i], diff)
            bump = kappa[i] * torch.exp(-0.5 * m2)
            sigma += bump
            weighted += bump.unsqueeze(-1) * colors[i]
        color = weighted / sigma.clamp_min(1e-12).unsqueeze(-1)
        color = torch.where(sigma.unsqueeze(-1) > 1e-12, color, torch.full_like(color, 0.5))

        shape = (resolution, resolution, resolution)
        grid.density_raw.copy_(_inverse_softplus(sigma).reshape(1, *shape))
        grid.color_logits.copy_(torch.logit(color.clamp(1e-4, 1 - 1e-4)).T.reshape(3, *shape))
    return grid
