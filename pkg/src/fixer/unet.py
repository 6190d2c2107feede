"""
Single-step denoiser: a small U-Net whose coarse scales mix information across the
target view and its reference views.

The target view is slot 0 of the view axis. The output head is zero-initialized and
added to the encoded (un-noised) degraded image, so an untrained model is the identity.
"""

import math

import torch
import torch.nn.functional as F
from einops import rearrange
from torch import nn

from src.errors import ResolutionError
from src.fixer.attention import ReferenceMixingAttention
from src.fixer.codec import make_codec
from src.fixer.schedule import NoiseSchedule, add_noise
from src.models.config_types import FixerConfig

GROUPS = 8


def timestep_embedding(tau: torch.Tensor, dim: int, max_period: float = 10000.0) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-math.log(max_period) * torch.arange(half, dtype=torch.float64) / half)
    args = tau.to(torch.float64)[:, None] * freqs[None]
    emb = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb


class ResBlock(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, temb_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(min(GROUPS, in_channels), in_channels)
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.temb = nn.Linear(temb_dim, out_channels)
        self.norm2 = nn.GroupNorm(min(GROUPS, out_channels), out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1)
        self.skip = nn.Conv2d(in_channels, out_channels, 1) if in_channels != out_channels else nn.Identity()

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.temb(F.silu(temb))[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return self.skip(x) + h


class MixingBlock(nn.Module):
    """Applies reference mixing to (B*V, C, H, W) activations."""

    def __init__(self, channels: int, heads: int):
        super().__init__()
        self.attention = ReferenceMixingAttention(channels, heads)

    def forward(self, x: torch.Tensor, views: int) -> torch.Tensor:
        z = rearrange(x, "(b v) c h w -> b v c h w", v=views)
        return rearrange(self.attention(z), "b v c h w -> (b v) c h w")


class DenoiserModel(nn.Module):
    """U-Net F_theta mapping (degraded, references, tau) to a fixed image in one pass."""

    def __init__(self, config: FixerConfig | None = None):
        super().__init__()
        self.config = config or FixerConfig()
        widths = self.config.widths
        n_levels = len(widths)
        self.schedule = NoiseSchedule.from_kind(self.config.schedule)
        self.codec = make_codec(self.config.codec)
        channels = self.codec.latent_channels
        temb_dim = 4 * widths[0]
        attention_from = n_levels - self.config.attention_levels

        generator_state = torch.random.get_rng_state()
        torch.manual_seed(self.config.seed)
        try:
            self.time_mlp = nn.Sequential(nn.Linear(widths[0], temb_dim), nn.SiLU(), nn.Linear(temb_dim, temb_dim))
            self.inlet = nn.Conv2d(channels, widths[0], 3, padding=1)

            self.down_blocks = nn.ModuleList()
            self.down_attn = nn.ModuleList()
            self.downsample = nn.ModuleList()
            for level, width in enumerate(widths):
                self.down_blocks.append(ResBlock(width, width, temb_dim))
                self.down_attn.append(MixingBlock(width, self.config.heads) if level >= attention_from else nn.Identity())
                if level < n_levels - 1:
                    self.downsample.append(nn.Conv2d(width, widths[level + 1], 3, stride=2, padding=1))

            self.mid_block = ResBlock(widths[-1], widths[-1], temb_dim)

            self.upsample = nn.ModuleList()
            self.up_blocks = nn.ModuleList()
            self.up_attn = nn.ModuleList()
            for level in reversed(range(n_levels - 1)):
                self.upsample.append(nn.Conv2d(widths[level + 1], widths[level], 3, padding=1))
                self.up_blocks.append(ResBlock(2 * widths[level], widths[level], temb_dim))
                self.up_attn.append(MixingBlock(widths[level], self.config.heads) if level >= attention_from else nn.Identity())

            self.out_norm = nn.GroupNorm(min(GROUPS, widths[0]), widths[0])
            self.head = nn.Conv2d(widths[0], channels, 3, padding=1)
        finally:
            torch.random.set_rng_state(generator_state)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    @property
    def required_multiple(self) -> int:
        return self.codec.factor * 2 ** (len(self.config.widths) - 1)

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def check_resolution(self, height: int, width: int) -> None:
        m = self.required_multiple
        if height % m or width % m:
            raise ResolutionError(f"image size {height}x{width} is not a multiple of {m}", required_multiple=m)

    def _apply(self, x: torch.Tensor, block, views: int) -> torch.Tensor:
        return block(x, views) if isinstance(block, MixingBlock) else block(x)

    def _unet(self, x: torch.Tensor, temb: torch.Tensor, views: int) -> torch.Tensor:
        h = self.inlet(x)
        skips = []
        for level, block in enumerate(self.down_blocks):
            h = self._apply(block(h, temb), self.down_attn[level], views)
            if level < len(self.downsample):
                skips.append(h)
                h = self.downsample[level](h)
        h = self.mid_block(h, temb)
        for i, block in enumerate(self.up_blocks):
            h = self.upsample[i](F.interpolate(h, scale_factor=2, mode="nearest"))
            h = block(torch.cat([h, skips.pop()], dim=1), temb)
            h = self._apply(h, self.up_attn[i], views)
        return self.head(F.silu(self.out_norm(h)))

    def forward(
        self,
        degraded: torch.Tensor,
        references: torch.Tensor | None,
        tau: torch.Tensor | int,
        noise: torch.Tensor | None = None,
        reference_noise: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """
        Args:
            degraded: (B, 3, H, W) target views
            references: (B, V_ref, 3, H, W) clean reference views, or None
            tau: timestep, scalar or (B,)
            noise: latent-shaped noise for the target; zeros when omitted
            reference_noise: noise for the references, used only with `noise_references`

        Returns:
            (B, V, 3, H, W) decoded outputs; slot 0 is the fixed target, the rest are
            the regenerated reference slots.
        """
        self.check_resolution(*degraded.shape[-2:])
        batch = degraded.shape[0]
        if references is None or self.config.reference_views == 0:
            references = degraded.new_zeros((batch, 0, *degraded.shape[1:]))
        views = 1 + references.shape[1]
        tau = torch.as_tensor(tau).reshape(-1).expand(batch)

        stacked = rearrange(torch.cat([degraded.unsqueeze(1), references], dim=1), "b v c h w -> (b v) c h w")
        clean_latent = self.codec.encode(stacked)
        clean_latent = rearrange(clean_latent, "(b v) c h w -> b v c h w", v=views)

        target = clean_latent[:, 0]
        eps = noise if noise is not None else torch.zeros_like(target)
        noisy = [add_noise(target, tau, eps, self.schedule).unsqueeze(1)]
        if views > 1:
            refs = clean_latent[:, 1:]
            if self.config.noise_references and reference_noise is not None:
                ref_tau = tau.repeat_interleave(views - 1)
                refs = add_noise(refs.flatten(0, 1), ref_tau, reference_noise.flatten(0, 1), self.schedule).reshape(refs.shape)
            noisy.append(refs)
        x = rearrange(torch.cat(noisy, dim=1), "b v c h w -> (b v) c h w")

        temb = self.time_mlp(timestep_embedding(tau.repeat_interleave(views), self.config.widths[0]).to(x.dtype))
        residual = self._unet(x, temb, views)
        out = self.codec.decode(rearrange(clean_latent, "b v c h w -> (b v) c h w") + residual)
        return rearrange(out, "(b v) c h w -> b v c h w", v=views)
