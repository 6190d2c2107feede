import torch

from src.models.camera_types import Camera
from src.scene.base import SceneRepresentation, render


def visibility_mask(scene: SceneRepresentation, camera: Camera, threshold: float = 0.5) -> torch.Tensor:
    """Pixels of `camera` plausibly observed by the views `scene` was fit on: accumulation >= threshold."""
    with torch.no_grad():
        return render(scene, camera).accumulation >= threshold
