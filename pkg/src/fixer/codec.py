"""
Latent codec seam between images and the denoiser.

`identity` keeps the denoiser in pixel space. `autoencoder` is a small 4x conv
autoencoder pre-trained on reconstruction and frozen while the denoiser trains.
"""

import logging

import torch
import torch.nn.functional as F
from torch import nn
from tqdm import tqdm

logger = logging.getLogger(__name__)


class IdentityCodec(nn.Module):
    factor = 1

    def __init__(self, channels: int = 3):
        super().__init__()
        self.latent_channels = channels

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        return x

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        return z


class AutoencoderCodec(nn.Module):
    factor = 4

    def __init__(self, channels: int = 3, latent_channels: int = 4, hidden: int = 32):
        super().__init__()
        self.latent_channels = latent_channels
        self.encoder = nn.Sequential(
            nn.Conv2d(channels, hidden, 3, stride=2, padding=1),
            nn.SiLU(),
            nn.Conv2d(hidden, hidden, 3, stride=2, padding=1),
            nn.SiLU(),
            nn.Conv2d(hidden, latent_channels, 3, padding=1),
        )
        self.decoder = nn.Sequential(
            nn.Conv2d(latent_channels, hidden, 3, padding=1),
            nn.SiLU(),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(hidden, hidden, 3, padding=1),
            nn.SiLU(),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(hidden, channels, 3, padding=1),
        )

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        return self.encoder(x)

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        return self.decoder(z)


def make_codec(kind: str) -> nn.Module:
    if kind == "identity":
        return IdentityCodec()
    if kind == "autoencoder":
        return AutoencoderCodec()
    raise ValueError(f"unknown codec '{kind}'")


def train_codec(
    codec: AutoencoderCodec, images: torch.Tensor, steps: int, lr: float = 1e-3, batch_size: int = 8, seed: int = 0, progress: bool = False
) -> list[float]:
    """Reconstruction pre-training on an (N, 3, H, W) image stack; freezes the codec afterwards."""
    optimizer = torch.optim.Adam(codec.parameters(), lr=lr)
    generator = torch.Generator().manual_seed(seed)
    losses = []
    codec.train()
    for _ in tqdm(range(steps), desc="codec", disable=not progress, leave=False):
        index = torch.randint(len(images), (min(batch_size, len(images)),), generator=generator)
        batch = images[index]
        loss = F.mse_loss(codec.decode(codec.encode(batch)), batch)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        losses.append(float(loss.detach()))
    codec.eval()
    codec.requires_grad_(False)
    if losses:
        logger.info("Codec trained", extra={"steps": steps, "final_loss": losses[-1]})
    return losses
