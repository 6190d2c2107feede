"""
PNG image I/O. In memory images are float tensors shaped (3, H, W) in [0, 1].
"""

from pathlib import Path

import numpy as np
import torch
from PIL import Image


def to_uint8(image: torch.Tensor) -> np.ndarray:
    """Quantize a (3, H, W) float image to an (H, W, 3) uint8 array."""
    array = image.detach().to(torch.float64).clamp(0.0, 1.0).permute(1, 2, 0).cpu().numpy()
    return np.round(array * 255.0).astype(np.uint8)


def save_png(path: str | Path, image: torch.Tensor) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(image)).save(path)
    return path


def load_png(path: str | Path, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    with Image.open(path) as img:
        array = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return torch.from_numpy(array).permute(2, 0, 1).contiguous().to(dtype)


def quantize(image: torch.Tensor) -> torch.Tensor:
    """Round-trip an image through 8-bit precision without touching disk."""
    return torch.round(image.clamp(0.0, 1.0) * 255.0) / 255.0
