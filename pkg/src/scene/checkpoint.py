"""
Scene checkpoints in the shared container format.
"""

from pathlib import Path

import torch

from src.errors import ViewfixError
from src.scene.base import SceneRepresentation
from src.scene.field import RadianceFieldGrid
from src.scene.gaussians import GaussianCloud
from src.storage import read_container, write_container


def save_scene(path: str | Path, scene: SceneRepresentation) -> Path:
    metadata, blocks = scene.checkpoint_state()
    return write_container(path, scene.kind, metadata, {name: t.cpu().numpy() for name, t in blocks.items()})


def load_scene(path: str | Path, dtype: torch.dtype = torch.float32) -> SceneRepresentation:
    container = read_container(path)
    blocks = {name: torch.as_tensor(array, dtype=dtype) for name, array in container.blocks.items()}
    if container.kind == RadianceFieldGrid.kind:
        lo, hi = container.metadata["bounds"]
        grid = RadianceFieldGrid((tuple(lo), tuple(hi)), resolution=container.metadata["resolution"], dtype=dtype)
        with torch.no_grad():
            grid.density_raw.copy_(blocks["density_raw"])
            grid.color_logits.copy_(blocks["color_logits"])
        return grid
    if container.kind == GaussianCloud.kind:
        return GaussianCloud(
            blocks["means"],
            blocks["rotations"],
            blocks["log_scales"],
            blocks["opacity_logits"],
            blocks["color_logits"],
        )
    raise ViewfixError(f"Unknown scene checkpoint kind '{container.kind}'", {"path": str(path)})
