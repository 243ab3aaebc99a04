import math
from typing import Optional, Tuple, Union

import torch
from torch import nn

from talking_clip.core.errors import ShapeMismatch


def sinusoidal_embedding(t: Union[int, float, torch.Tensor], dim: int, max_period: float = 10000.0) -> torch.Tensor:
    """Sinusoidal features of a scalar timestep, [dim] (cos half first)."""
    t = torch.as_tensor(t, dtype=torch.float64).reshape(())
    half = dim // 2
    freqs = torch.exp(-math.log(max_period) * torch.arange(half, dtype=torch.float64) / half)
    args = t * freqs
    emb = torch.cat([torch.cos(args), torch.sin(args)])
    if dim % 2 == 1:
        emb = torch.cat([emb, torch.zeros(1, dtype=torch.float64)])
    return emb


class TimestepEmbedding(nn.Module):
    """Sinusoidal features followed by a two layer MLP, optionally shifted by a motion latent."""

    def __init__(self, in_dim: int, embed_dim: int) -> None:
        super().__init__()
        self.in_dim = in_dim
        self.linear_1 = nn.Linear(in_dim, embed_dim)
        self.act = nn.SiLU()
        self.linear_2 = nn.Linear(embed_dim, embed_dim)

    def forward(self, t: Union[int, float, torch.Tensor], motion_latent: Optional[torch.Tensor] = None) -> torch.Tensor:
        dtype = self.linear_1.weight.dtype
        emb = self.linear_2(self.act(self.linear_1(sinusoidal_embedding(t, self.in_dim).to(dtype))))
        if motion_latent is not None:
            if motion_latent.shape != emb.shape:
                raise ShapeMismatch(
                    f"motion latent {tuple(motion_latent.shape)} != timestep embedding {tuple(emb.shape)}"
                )
            emb = emb + motion_latent.to(dtype)
        return emb


class TemporalEmbedding(nn.Module):
    """Learnable per-position embeddings that tell motion-frame tokens from noisy-clip tokens."""

    def __init__(self, num_motion: int, num_frames: int, dim: int) -> None:
        super().__init__()
        self.mf_embed = nn.Parameter(torch.randn(num_motion, dim) * 0.02)
        self.noisy_embed = nn.Parameter(torch.randn(num_frames, dim) * 0.02)

    def forward(
        self, noisy: torch.Tensor, motion: Optional[torch.Tensor]
    ) -> Tuple[torch.Tensor, Optional[torch.Tensor]]:
        """Add embeddings to [N, F, D] noisy and [N, M', D] motion token sequences."""
        if noisy.shape[1] > self.noisy_embed.shape[0]:
            raise ShapeMismatch(f"clip of {noisy.shape[1]} frames exceeds {self.noisy_embed.shape[0]} embeddings")
        noisy = noisy + self.noisy_embed[: noisy.shape[1]]
        if motion is not None:
            if motion.shape[1] != self.mf_embed.shape[0]:
                raise ShapeMismatch(f"expected {self.mf_embed.shape[0]} motion slots, got {motion.shape[1]}")
            motion = motion + self.mf_embed
        return noisy, motion
