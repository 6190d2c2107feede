"""
Fixed multi-stage convolutional feature extractor.

Stages are bias-free 3x3 stride-2 convolutions followed by ReLU, widths doubling.
Weights come from a seeded generator or from a pretrained container and never
receive gradients.
"""

import math
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

from src.errors import ShapeMismatchError
from src.models.config_types import ExtractorConfig
from src.storage import read_container, write_container

CONTAINER_KIND = "feature_extractor"


class FeatureExtractor(nn.Module):
    """phi_1 .. phi_L with per-stage perceptual (alpha) and Gram (beta) weights."""

    def __init__(
        self,
        widths: tuple[int, ...] = (16, 32, 64, 128),
        seed: int = 0,
        layer_weights: list[float] | None = None,
        gram_weights: list[float] | None = None,
        in_channels: int = 3,
    ):
        super().__init__()
        self.widths = tuple(widths)
        self.seed = seed
        self.layer_weights = list(layer_weights) if layer_weights is not None else [1.0] * len(widths)
        self.gram_weights = list(gram_weights) if gram_weights is not None else [1.0] * len(widths)
        if len(self.layer_weights) != len(widths) or len(self.gram_weights) != len(widths):
            raise ValueError(f"expected {len(widths)} per-stage weights")

        generator = torch.Generator().manual_seed(seed)
        weights = []
        channels = in_channels
        for width in widths:
            std = math.sqrt(2.0 / (channels * 9))
            weights.append(nn.Parameter(torch.randn(width, channels, 3, 3, generator=generator) * std, requires_grad=False))
            channels = width
        self.stages = nn.ParameterList(weights)

    @classmethod
    def from_config(cls, config: ExtractorConfig) -> "FeatureExtractor":
        if config.pretrained_path:
            return load_pretrained_extractor(config.pretrained_path, config.layer_weights, config.gram_weights)
        return cls(config.widths, config.seed, config.layer_weights, config.gram_weights)

    @property
    def n_layers(self) -> int:
        return len(self.stages)

    def forward(self, images: torch.Tensor) -> list[torch.Tensor]:
        """Feature maps of every stage for (B, 3, H, W) or (3, H, W) input."""
        x = images.unsqueeze(0) if images.dim() == 3 else images
        features = []
        for weight in self.stages:
            x = F.relu(F.conv2d(x, weight.to(x.dtype), stride=2, padding=1))
            features.append(x)
        return features

    def paired_features(self, a: torch.Tensor, b: torch.Tensor) -> tuple[list[torch.Tensor], list[torch.Tensor]]:
        if a.shape != b.shape:
            raise ShapeMismatchError(f"images differ in shape: {tuple(a.shape)} vs {tuple(b.shape)}")
        return self(a), self(b)


def save_extractor(path: str | Path, extractor: FeatureExtractor) -> Path:
    blocks = {f"stage{i}": w.detach().cpu().numpy() for i, w in enumerate(extractor.stages)}
    return write_container(path, CONTAINER_KIND, {"widths": list(extractor.widths), "seed": extractor.seed}, blocks)


def load_pretrained_extractor(
    path: str | Path, layer_weights: list[float] | None = None, gram_weights: list[float] | None = None
) -> FeatureExtractor:
    """Extractor whose stage weights come from a `feature_extractor` container."""
    container = read_container(path, expected_kind=CONTAINER_KIND)
    widths = tuple(container.metadata["widths"])
    in_channels = container.blocks["stage0"].shape[1]
    extractor = FeatureExtractor(
        widths, seed=container.metadata.get("seed", 0), layer_weights=layer_weights, gram_weights=gram_weights, in_channels=in_channels
    )
    with torch.no_grad():
        for i, weight in enumerate(extractor.stages):
            block = torch.as_tensor(container.blocks[f"stage{i}"])
            if tuple(block.shape) != tuple(weight.shape):
                raise ShapeMismatchError(f"stage{i} weights {tuple(block.shape)} do not fit {tuple(weight.shape)}")
            weight.copy_(block)
    return extractor
