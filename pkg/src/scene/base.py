"""
Shared scene interface and the camera-level render entry point.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass

import torch
from torch import nn

from src.geometry import camera_rays
from src.models.camera_types import Camera

DEFAULT_BACKGROUND = 0.5
RAY_CHUNK = 4096


@dataclass
class RenderOutput:
    """rgb (3, H, W) in [0, 1]; depth (H, W) camera-frame z; accumulation (H, W) in [0, 1]."""

    rgb: torch.Tensor
    depth: torch.Tensor
    accumulation: torch.Tensor

    def detach(self) -> "RenderOutput":
        return RenderOutput(self.rgb.detach(), self.depth.detach(), self.accumulation.detach())


@dataclass
class RayBundle:
    """Flat batch of rays. `forward` is the viewing axis used to turn ray distance into z-depth."""

    origins: torch.Tensor
    directions: torch.Tensor
    forward: torch.Tensor

    def __len__(self) -> int:
        return self.origins.shape[0]

    def __getitem__(self, index) -> "RayBundle":
        return RayBundle(self.origins[index], self.directions[index], self.forward[index])

    @classmethod
    def from_camera(cls, camera: Camera, dtype: torch.dtype = torch.float32) -> "RayBundle":
        origins, directions = camera_rays(camera)
        n = origins.shape[0] * origins.shape[1]
        forward = torch.as_tensor(camera.pose.forward, dtype=dtype).expand(n, 3)
        return cls(
            torch.as_tensor(origins.reshape(n, 3), dtype=dtype),
            torch.as_tensor(directions.reshape(n, 3), dtype=dtype),
            forward,
        )


class SceneRepresentation(nn.Module, ABC):
    """A differentiable scene that can be queried along rays."""

    kind: str = ""

    @abstractmethod
    def render_rays(self, rays: RayBundle, background: float = DEFAULT_BACKGROUND) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Return (rgb (N, 3), z-depth (N,), accumulation (N,)) with the background blended in."""

    @abstractmethod
    def checkpoint_state(self) -> tuple[dict, dict[str, torch.Tensor]]:
        """Header metadata and named parameter blocks for the checkpoint container."""

    @property
    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype


def render(scene: SceneRepresentation, camera: Camera, background: float = DEFAULT_BACKGROUND) -> RenderOutput:
    """Render every pixel of `camera`. Differentiable with respect to the scene parameters."""
    rays = RayBundle.from_camera(camera, dtype=scene.dtype)
    rgbs, depths, accs = [], [], []
    for start in range(0, len(rays), RAY_CHUNK):
        rgb, depth, acc = scene.render_rays(rays[start : start + RAY_CHUNK], background=background)
        rgbs.append(rgb)
        depths.append(depth)
        accs.append(acc)
    h, w = camera.height, camera.width
    return RenderOutput(
        rgb=torch.cat(rgbs).reshape(h, w, 3).permute(2, 0, 1),
        depth=torch.cat(depths).reshape(h, w),
        accumulation=torch.cat(accs).reshape(h, w),
    )
