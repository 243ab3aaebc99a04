"""Conditioned denoising U-Net.

Every block runs, in order: timestep-modulated residual conv, spatial attention with reference
injection, inter-clip temporal attention, additive audio cross-attention and intra-clip temporal
attention (`audio_after_intra` swaps the last two). Stage-1 networks are built without the temporal
and audio layers.
"""

import dataclasses
from typing import Optional, Union

import torch
import torch.nn.functional as F
from einops import rearrange
from torch import nn

from talking_clip.core.config import ModelConfig
from talking_clip.core.errors import ShapeMismatch
from talking_clip.model.blocks import (
    AudioCrossAttention,
    Downsample,
    InterClipTemporal,
    IntraClipTemporal,
    ResBlock,
    SpatialAttention,
    Upsample,
)
from talking_clip.model.embeddings import TimestepEmbedding
from talking_clip.model.reference_net import ReferenceFeatureCache, inject_spatial

# Parameter name fragments that only exist in the full (stage-2) model.
TEMPORAL_GROUPS = ("inter_clip.", "intra_clip.")
AUDIO_GROUPS = ("audio_attn.", "audio_to_latents.")


@dataclasses.dataclass(frozen=True)
class DenoiserInputs:
    """Per-call conditioning already resolved for the denoiser."""

    audio_embed: Optional[torch.Tensor] = None  # [F, 5, A]
    cache: Optional[ReferenceFeatureCache] = None
    drop_ref: bool = False
    mask_motion_frames: bool = False
    mask_audio: bool = False
    mf_valid: Optional[torch.Tensor] = None  # [n_slots]


class MotionBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, cfg: ModelConfig, full: bool) -> None:
        super().__init__()
        self.res = ResBlock(in_ch, out_ch, cfg.time_embed_dim, cfg.norm_groups)
        self.spatial = SpatialAttention(out_ch, cfg.attention_heads)
        self.audio_after_intra = cfg.audio_after_intra
        self.inter_clip: Optional[InterClipTemporal] = None
        self.audio_attn: Optional[AudioCrossAttention] = None
        self.intra_clip: Optional[IntraClipTemporal] = None
        if full:
            self.inter_clip = InterClipTemporal(out_ch, cfg.attention_heads, cfg.n_motion_slots, cfg.clip_len)
            self.audio_attn = AudioCrossAttention(out_ch, cfg.audio_feature_dim, cfg.attention_heads)
            if cfg.temporal_layers == "dual":
                self.intra_clip = IntraClipTemporal(out_ch, cfg.attention_heads)

    def forward(self, x: torch.Tensor, temb: torch.Tensor, inputs: DenoiserInputs, block_id: str) -> torch.Tensor:
        h = self.res(x, temb)
        height, width = h.shape[-2:]
        tokens = rearrange(h, "f c h w -> f (h w) c")
        tokens = inject_spatial(self.spatial, tokens, inputs.cache, block_id, inputs.drop_ref)

        if self.inter_clip is not None:
            mf_feats = None
            if not inputs.drop_ref and inputs.cache is not None:
                mf_feats = inputs.cache.get(block_id).mf_feats
            tokens = self.inter_clip(tokens, mf_feats, inputs.mask_motion_frames, inputs.mf_valid)
        if self.audio_after_intra:
            tokens = self._intra(tokens)
            tokens = self._audio(tokens, inputs)
        else:
            tokens = self._audio(tokens, inputs)
            tokens = self._intra(tokens)
        return rearrange(tokens, "f (h w) c -> f c h w", h=height, w=width)

    def _audio(self, tokens: torch.Tensor, inputs: DenoiserInputs) -> torch.Tensor:
        if self.audio_attn is None:
            return tokens
        if inputs.audio_embed is None:
            raise ShapeMismatch("audio layers need an audio embedding")
        return self.audio_attn(tokens, inputs.audio_embed, inputs.mask_audio)

    def _intra(self, tokens: torch.Tensor) -> torch.Tensor:
        return tokens if self.intra_clip is None else self.intra_clip(tokens)


class Denoiser(nn.Module):
    def __init__(self, cfg: ModelConfig, full: bool = True) -> None:
        super().__init__()
        chs = list(cfg.unet_channel_schedule)
        self.num_levels = len(chs)
        self.full = full
        self.conv_in = nn.Conv2d(cfg.latent_channels, chs[0], 3, padding=1)
        self.time_embedding = TimestepEmbedding(chs[0], cfg.time_embed_dim)

        self.down_blocks = nn.ModuleList()
        self.downsamplers = nn.ModuleList()
        prev = chs[0]
        for i, ch in enumerate(chs):
            self.down_blocks.append(MotionBlock(prev, ch, cfg, full))
            self.downsamplers.append(Downsample(ch) if i < len(chs) - 1 else nn.Identity())
            prev = ch
        self.mid_block = MotionBlock(chs[-1], chs[-1], cfg, full)

        self.up_blocks = nn.ModuleList()
        self.upsamplers = nn.ModuleList()
        cur = chs[-1]
        for i in reversed(range(len(chs))):
            self.up_blocks.append(MotionBlock(cur + chs[i], chs[i], cfg, full))
            self.upsamplers.append(Upsample(chs[i]) if i > 0 else nn.Identity())
            cur = chs[i]

        self.norm_out = nn.GroupNorm(cfg.norm_groups, chs[0])
        self.conv_out = nn.Conv2d(chs[0], cfg.latent_channels, 3, padding=1)

    def forward(
        self,
        z_t: torch.Tensor,
        t: Union[int, torch.Tensor],
        inputs: DenoiserInputs,
        motion_latent: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """Predict the noise of [F, C, h, w] noisy latents."""
        if z_t.dim() != 4:
            raise ShapeMismatch(f"z_t must be [F, C, h, w], got {tuple(z_t.shape)}")
        temb = self.time_embedding(t, motion_latent)
        h = self.conv_in(z_t.to(self.conv_in.weight.dtype))
        skips = []
        for i, (block, down) in enumerate(zip(self.down_blocks, self.downsamplers)):
            h = block(h, temb, inputs, f"down{i}")
            skips.append(h)
            h = down(h)
        h = self.mid_block(h, temb, inputs, "mid")
        for block, up, i in zip(self.up_blocks, self.upsamplers, reversed(range(self.num_levels))):
            h = block(torch.cat([h, skips[i]], dim=1), temb, inputs, f"up{i}")
            h = up(h)
        return self.conv_out(F.silu(self.norm_out(h)))
