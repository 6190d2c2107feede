"""
Per-scene fitting: gradient descent on a weighted L2 photometric loss over rays.
"""

import logging
import math
from typing import NamedTuple

import torch
from tqdm import tqdm

from src.errors import SceneOptimizationError, ShapeMismatchError
from src.models.camera_types import Camera
from src.scene.base import DEFAULT_BACKGROUND, RayBundle, SceneRepresentation

logger = logging.getLogger(__name__)

DEFAULT_LR = {"radiance_field": 1e-2, "gaussian_cloud": 5e-3}


class TrainingView(NamedTuple):
    camera: Camera
    image: torch.Tensor
    weight: float = 1.0


class FitResult(NamedTuple):
    scene: SceneRepresentation
    losses: list[float]


def _gather_rays(scene: SceneRepresentation, views: list[TrainingView]) -> tuple[RayBundle, torch.Tensor, torch.Tensor]:
    bundles, targets, weights = [], [], []
    for index, view in enumerate(views):
        expected = (3, view.camera.height, view.camera.width)
        if tuple(view.image.shape) != expected:
            raise ShapeMismatchError(f"view {index}: image {tuple(view.image.shape)} does not match camera {expected}")
        bundles.append(RayBundle.from_camera(view.camera, dtype=scene.dtype))
        targets.append(view.image.to(scene.dtype).permute(1, 2, 0).reshape(-1, 3))
        weights.append(torch.full((targets[-1].shape[0],), float(view.weight), dtype=scene.dtype))
    rays = RayBundle(
        torch.cat([b.origins for b in bundles]),
        torch.cat([b.directions for b in bundles]),
        torch.cat([b.forward for b in bundles]),
    )
    return rays, torch.cat(targets), torch.cat(weights)


def photometric_loss(scene: SceneRepresentation, rays: RayBundle, targets: torch.Tensor, weights: torch.Tensor, background: float) -> torch.Tensor:
    rgb, _, _ = scene.render_rays(rays, background=background)
    per_ray = ((rgb - targets) ** 2).mean(dim=-1)
    return (weights * per_ray).sum() / weights.sum().clamp_min(1e-12)


def _diagnostics(scene: SceneRepresentation, step: int, losses: list[float]) -> dict:
    stats = {}
    for name, param in scene.named_parameters():
        data = param.detach()
        finite = torch.isfinite(data)
        stats[name] = {
            "non_finite": int((~finite).sum()),
            "abs_max": float(data[finite].abs().max()) if finite.any() else math.nan,
        }
    last = next((v for v in reversed(losses) if math.isfinite(v)), None)
    return {"step": step, "last_finite_loss": last, "parameters": stats}


def optimize_scene(
    scene: SceneRepresentation,
    views: list[TrainingView],
    n_iters: int,
    lr: float | None = None,
    rays_per_step: int | None = 4096,
    seed: int = 0,
    background: float = DEFAULT_BACKGROUND,
    progress: bool = False,
) -> FitResult:
    """
    Fit `scene` in place to the given views with Adam.

    Each step draws `rays_per_step` rays from a generator seeded by `seed`; when the
    views hold fewer rays (or `rays_per_step` is None) every step is full batch.

    Raises:
        SceneOptimizationError: the loss became non-finite; details carry a parameter dump.
    """
    if not views:
        raise ValueError("optimize_scene needs at least one view")
    losses: list[float] = []
    if n_iters <= 0 or not any(p.numel() for p in scene.parameters()):
        return FitResult(scene, losses)

    rays, targets, weights = _gather_rays(scene, views)
    lr = DEFAULT_LR.get(scene.kind, 1e-2) if lr is None else lr
    optimizer = torch.optim.Adam(scene.parameters(), lr=lr)
    generator = torch.Generator().manual_seed(seed)
    full_batch = rays_per_step is None or rays_per_step >= len(rays)

    for step in tqdm(range(n_iters), desc=f"fit {scene.kind}", disable=not progress, leave=False):
        if full_batch:
            batch, batch_targets, batch_weights = rays, targets, weights
        else:
            index = torch.randperm(len(rays), generator=generator)[:rays_per_step]
            batch, batch_targets, batch_weights = rays[index], targets[index], weights[index]

        optimizer.zero_grad()
        loss = photometric_loss(scene, batch, batch_targets, batch_weights, background)
        value = float(loss.detach())
        if not math.isfinite(value):
            details = _diagnostics(scene, step, losses)
            logger.error("Scene fit diverged", extra={"step": step, "kind": scene.kind})
            raise SceneOptimizationError(f"non-finite photometric loss at step {step}", details)
        loss.backward()
        optimizer.step()
        losses.append(value)

    logger.debug("Scene fit done", extra={"kind": scene.kind, "steps": n_iters, "final_loss": losses[-1]})
    return FitResult(scene, losses)
