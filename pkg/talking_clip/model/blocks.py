from typing import Optional

import torch
import torch.nn.functional as F
from einops import rearrange
from torch import nn

from talking_clip.core.errors import ShapeMismatch, expect_shape
from talking_clip.model.attention import Attention
from talking_clip.model.embeddings import TemporalEmbedding


class ResBlock(nn.Module):
    """Convolutional residual block modulated by the timestep embedding."""

    def __init__(self, in_ch: int, out_ch: int, temb_dim: int, groups: int) -> None:
        super().__init__()
        self.norm_1 = nn.GroupNorm(min(groups, in_ch), in_ch)
        self.conv_1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.temb_proj = nn.Linear(temb_dim, out_ch)
        self.norm_2 = nn.GroupNorm(groups, out_ch)
        self.conv_2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        h = self.conv_1(F.silu(self.norm_1(x)))
        h = h + self.temb_proj(F.silu(temb)).view(1, -1, 1, 1)
        h = self.conv_2(F.silu(self.norm_2(h)))
        return self.skip(x) + h


class Downsample(nn.Module):
    def __init__(self, ch: int) -> None:
        super().__init__()
        self.conv = nn.Conv2d(ch, ch, 3, stride=2, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(x)


class Upsample(nn.Module):
    def __init__(self, ch: int) -> None:
        super().__init__()
        self.conv = nn.Conv2d(ch, ch, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(F.interpolate(x, scale_factor=2.0, mode="nearest"))


class SpatialAttention(nn.Module):
    """Per-frame self-attention over spatial tokens, with optional reference-feature injection.

    With a reference feature the keys and values run over [frame tokens ; reference tokens] while the
    queries stay the frame tokens, so the token count is never changed.
    """

    def __init__(self, dim: int, heads: int) -> None:
        super().__init__()
        self.norm = nn.LayerNorm(dim)
        self.attn = Attention(dim, heads)

    def forward(self, x: torch.Tensor, ref_feat: Optional[torch.Tensor] = None) -> torch.Tensor:
        """x: [F, T, D], ref_feat: [T_ref, D] shared by every frame."""
        h = self.norm(x)
        if ref_feat is None:
            return x + self.attn(h)
        if ref_feat.dim() != 2 or ref_feat.shape[-1] != x.shape[-1]:
            raise ShapeMismatch(f"reference feature {tuple(ref_feat.shape)} does not match block width {x.shape[-1]}")
        ref = self.norm(ref_feat).unsqueeze(0).expand(x.shape[0], -1, -1)
        return x + self.attn(h, torch.cat([h, ref], dim=1))


class InterClipTemporal(nn.Module):
    """Temporal self-attention over [motion-frame tokens ; noisy-clip tokens] per spatial location.

    Only the noisy positions are returned, residual-added to the input. Motion features can be masked
    (kept as zero tokens) or absent (no concatenation at all).
    """

    def __init__(self, dim: int, heads: int, num_motion: int, num_frames: int) -> None:
        super().__init__()
        self.temporal_embedding = TemporalEmbedding(num_motion, num_frames, dim)
        self.norm = nn.LayerNorm(dim)
        self.attn = Attention(dim, heads)

    def forward(
        self,
        noisy_feat: torch.Tensor,
        mf_feats: Optional[torch.Tensor],
        mask_mf: bool = False,
        mf_valid: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """noisy_feat: [F, T, D], mf_feats: [M', T, D] or None (dropped)."""
        num_frames = noisy_feat.shape[0]
        noisy = rearrange(noisy_feat, "f t d -> t f d")
        motion: Optional[torch.Tensor] = None
        if mf_feats is not None:
            expect_shape("mf_feats", mf_feats.shape, (-1, noisy_feat.shape[1], noisy_feat.shape[2]))
            if mask_mf:
                mf_feats = torch.zeros_like(mf_feats)
            elif mf_valid is not None:
                mf_feats = mf_feats * mf_valid.to(mf_feats.dtype).view(-1, 1, 1)
            motion = rearrange(mf_feats, "m t d -> t m d")

        noisy, motion = self.temporal_embedding(noisy, motion)
        tokens = noisy if motion is None else torch.cat([motion, noisy], dim=1)
        out = self.attn(self.norm(tokens))[:, -num_frames:]
        return noisy_feat + rearrange(out, "t f d -> f t d")


class IntraClipTemporal(nn.Module):
    """Temporal self-attention over the noisy-clip frames only. It has no motion-frame input."""

    def __init__(self, dim: int, heads: int) -> None:
        super().__init__()
        self.norm = nn.LayerNorm(dim)
        self.attn = Attention(dim, heads)

    def forward(self, noisy_feat: torch.Tensor) -> torch.Tensor:
        tokens = rearrange(noisy_feat, "f t d -> t f d")
        out = self.attn(self.norm(tokens))
        return noisy_feat + rearrange(out, "t f d -> f t d")


class AudioCrossAttention(nn.Module):
    """Frame f's spatial tokens attend to frame f's 5-token audio window; the result is added."""

    def __init__(self, dim: int, audio_dim: int, heads: int) -> None:
        super().__init__()
        self.norm = nn.LayerNorm(dim)
        self.attn = Attention(dim, heads, context_dim=audio_dim)

    def forward(self, noisy_feat: torch.Tensor, c_audio: torch.Tensor, mask_audio: bool = False) -> torch.Tensor:
        """noisy_feat: [F, T, D], c_audio: [F, 5, A]."""
        if c_audio.dim() != 3 or c_audio.shape[0] != noisy_feat.shape[0]:
            raise ShapeMismatch(f"audio {tuple(c_audio.shape)} not aligned with {noisy_feat.shape[0]} frames")
        if mask_audio:
            c_audio = torch.zeros_like(c_audio)
        return noisy_feat + self.attn(self.norm(noisy_feat), c_audio.to(noisy_feat.dtype))
