"""
Self-attention over spatial tokens, and its reference-mixing generalization that
moves the view axis into the token axis.
"""

import torch
from einops import rearrange
from torch import nn


class SpatialSelfAttention(nn.Module):
    """Pre-norm multi-head self-attention over the h*w tokens of one image, with a residual."""

    def __init__(self, channels: int, heads: int = 4, groups: int = 8):
        super().__init__()
        self.channels = channels
        self.norm = nn.GroupNorm(min(groups, channels), channels)
        self.attn = nn.MultiheadAttention(channels, heads, batch_first=True)

    def _attend(self, tokens: torch.Tensor) -> torch.Tensor:
        out, _ = self.attn(tokens, tokens, tokens, need_weights=False)
        return out

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _, _, h, w = x.shape
        tokens = rearrange(self.norm(x), "n c h w -> n (h w) c")
        return x + rearrange(self._attend(tokens), "n (h w) c -> n c h w", h=h, w=w)


class ReferenceMixingAttention(SpatialSelfAttention):
    """
    Attention across views: 'b v c h w -> b (v h w) c', attend, and reshape back.

    The weights have exactly the shape of the plain spatial layer, so a pretrained
    single-view layer loads as-is; with V = 1 the two layers compute the same thing.
    """

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        b, v, c, h, w = z.shape
        normed = self.norm(rearrange(z, "b v c h w -> (b v) c h w"))
        tokens = rearrange(normed, "(b v) c h w -> b (v h w) c", b=b, v=v)
        mixed = rearrange(self._attend(tokens), "b (v h w) c -> b v c h w", v=v, h=h, w=w)
        return z + mixed


def reference_mixing_attention(z: torch.Tensor, layer: ReferenceMixingAttention) -> torch.Tensor:
    """Apply `layer` to (V, C, H, W) activations of a single sample."""
    return layer(z.unsqueeze(0))[0]
