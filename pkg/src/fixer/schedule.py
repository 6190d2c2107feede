"""
Variance-preserving noise schedules over timesteps 0..1000.
"""

import math
from dataclasses import dataclass

import torch

from src.errors import DomainError, ShapeMismatchError
from src.seeds import derive_seed

N_TIMESTEPS = 1000
COSINE_OFFSET = 0.008


@dataclass(frozen=True)
class NoiseSchedule:
    """x_tau = alpha[tau] * x + sigma[tau] * eps, with alpha[0] = 1 and sigma[0] = 0."""

    alpha: torch.Tensor
    sigma: torch.Tensor
    kind: str

    @classmethod
    def cosine(cls, n_timesteps: int = N_TIMESTEPS) -> "NoiseSchedule":
        steps = torch.arange(n_timesteps + 1, dtype=torch.float64) / n_timesteps

        def f(t):
            return torch.cos((t + COSINE_OFFSET) / (1 + COSINE_OFFSET) * math.pi / 2) ** 2

        alpha_bar = (f(steps) / f(torch.zeros((), dtype=torch.float64))).clamp(0.0, 1.0)
        return cls._from_alpha_bar(alpha_bar, "cosine")

    @classmethod
    def linear(cls, n_timesteps: int = N_TIMESTEPS, beta_start: float = 1e-4, beta_end: float = 2e-2) -> "NoiseSchedule":
        betas = torch.cat([torch.zeros(1, dtype=torch.float64), torch.linspace(beta_start, beta_end, n_timesteps, dtype=torch.float64)])
        return cls._from_alpha_bar(torch.cumprod(1.0 - betas, dim=0), "linear")

    @classmethod
    def from_kind(cls, kind: str) -> "NoiseSchedule":
        if kind == "cosine":
            return cls.cosine()
        if kind == "linear":
            return cls.linear()
        raise DomainError(f"unknown noise schedule '{kind}'")

    @classmethod
    def _from_alpha_bar(cls, alpha_bar: torch.Tensor, kind: str) -> "NoiseSchedule":
        alpha_bar = alpha_bar.clone()
        alpha_bar[0] = 1.0
        alpha = torch.sqrt(alpha_bar)
        # Monotone against round-off near the end of the cosine.
        alpha = torch.cummin(alpha, dim=0).values
        return cls(alpha=alpha, sigma=torch.sqrt((1.0 - alpha**2).clamp_min(0.0)), kind=kind)

    @property
    def n_timesteps(self) -> int:
        return self.alpha.shape[0] - 1

    def coefficients(self, tau) -> tuple[torch.Tensor, torch.Tensor]:
        tau_t = torch.as_tensor(tau)
        if bool(((tau_t < 0) | (tau_t > self.n_timesteps)).any()):
            raise DomainError(f"timestep must be in [0, {self.n_timesteps}], got {tau}")
        index = tau_t.long()
        return self.alpha[index], self.sigma[index]


def add_noise(x: torch.Tensor, tau, eps: torch.Tensor, schedule: NoiseSchedule | None = None) -> torch.Tensor:
    """alpha_tau * x + sigma_tau * eps; a per-sample tau broadcasts over the leading batch axis."""
    if x.shape != eps.shape:
        raise ShapeMismatchError(f"image {tuple(x.shape)} and noise {tuple(eps.shape)} differ")
    schedule = schedule or NoiseSchedule.cosine()
    alpha, sigma = schedule.coefficients(tau)
    if alpha.dim() == 1:
        shape = (-1,) + (1,) * (x.dim() - 1)
        alpha, sigma = alpha.reshape(shape), sigma.reshape(shape)
    return alpha.to(x.dtype) * x + sigma.to(x.dtype) * eps


def fixed_noise(shape: tuple[int, ...], noise_seed: int, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Noise field drawn from a generator seeded by (noise_seed, H, W)."""
    height, width = shape[-2], shape[-1]
    generator = torch.Generator().manual_seed(derive_seed(noise_seed, height, width))
    return torch.randn(shape, generator=generator, dtype=torch.float64).to(dtype)
