import time
from dataclasses import dataclass

import torch

from src.fixer import DenoiserModel, FixerInput, fix_image
from src.models.camera_types import Camera
from src.scene import DEFAULT_BACKGROUND, SceneRepresentation, render


@dataclass
class EnhanceResult:
    image: torch.Tensor
    raw: torch.Tensor
    render_ms: float
    fix_ms: float


def post_render_enhance(
    scene: SceneRepresentation,
    camera: Camera,
    fixer: DenoiserModel,
    references: list[torch.Tensor],
    background: float = DEFAULT_BACKGROUND,
) -> EnhanceResult:
    """fix_image applied to the render at `camera`, with wall-clock timing of both steps."""
    started = time.perf_counter()
    with torch.no_grad():
        raw = render(scene, camera, background=background).rgb.to(torch.float32).clamp(0.0, 1.0)
    rendered = time.perf_counter()
    image = fix_image(fixer, FixerInput(novel=raw, references=references, tau=fixer.config.tau))
    fixed = time.perf_counter()
    return EnhanceResult(image=image, raw=raw, render_ms=1000.0 * (rendered - started), fix_ms=1000.0 * (fixed - rendered))
