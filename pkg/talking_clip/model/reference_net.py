"""Reference network.

A replica of the denoiser's encoder/decoder block layout without temporal or audio layers. It runs
reference and abstracted motion-frame latents frame by frame at the t=0 timestep and records, for
every attention-bearing block, the tokens entering spatial attention. Weights are never shared with
the denoiser.
"""

import dataclasses
from typing import Dict, List, Optional

import torch
from einops import rearrange
from torch import nn

from talking_clip.core.config import ModelConfig
from talking_clip.core.errors import MissingCacheEntry, ShapeMismatch, expect_shape
from talking_clip.model.blocks import Downsample, ResBlock, SpatialAttention, Upsample
from talking_clip.model.embeddings import TimestepEmbedding
from talking_clip.temporal_segment.segment import SegmentSchedule


@dataclasses.dataclass(frozen=True)
class BlockFeatures:
    ref_feat: torch.Tensor  # [T, D]
    mf_feats: torch.Tensor  # [n_slots, T, D]


@dataclasses.dataclass(frozen=True)
class ReferenceFeatureCache:
    """Write-once map block_id -> reference and motion-frame features.

    `schedule` is the segment schedule the motion-frame features were abstracted with.
    """

    blocks: Dict[str, BlockFeatures]
    schedule: Optional[SegmentSchedule] = None

    def get(self, block_id: str) -> BlockFeatures:
        if block_id not in self.blocks:
            raise MissingCacheEntry(f"no reference features for block '{block_id}'")
        return self.blocks[block_id]

    def __contains__(self, block_id: object) -> bool:
        return block_id in self.blocks


def block_ids(num_levels: int) -> List[str]:
    """Attention-bearing block ids in forward order."""
    return [f"down{i}" for i in range(num_levels)] + ["mid"] + [f"up{i}" for i in reversed(range(num_levels))]


class RefBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, temb_dim: int, cfg: ModelConfig) -> None:
        super().__init__()
        self.res = ResBlock(in_ch, out_ch, temb_dim, cfg.norm_groups)
        self.spatial = SpatialAttention(out_ch, cfg.attention_heads)

    def forward(
        self, x: torch.Tensor, temb: torch.Tensor, captured: Dict[str, torch.Tensor], block_id: str
    ) -> torch.Tensor:
        h = self.res(x, temb)
        height, width = h.shape[-2:]
        tokens = rearrange(h, "n c h w -> n (h w) c")
        captured[block_id] = tokens
        tokens = self.spatial(tokens)
        return rearrange(tokens, "n (h w) c -> n c h w", h=height, w=width)


class ReferenceNet(nn.Module):
    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        chs = list(cfg.unet_channel_schedule)
        temb_dim = cfg.time_embed_dim
        self.num_levels = len(chs)
        self.conv_in = nn.Conv2d(cfg.latent_channels, chs[0], 3, padding=1)
        self.time_embedding = TimestepEmbedding(chs[0], temb_dim)

        self.down_blocks = nn.ModuleList()
        self.downsamplers = nn.ModuleList()
        prev = chs[0]
        for i, ch in enumerate(chs):
            self.down_blocks.append(RefBlock(prev, ch, temb_dim, cfg))
            self.downsamplers.append(Downsample(ch) if i < len(chs) - 1 else nn.Identity())
            prev = ch
        self.mid_block = RefBlock(chs[-1], chs[-1], temb_dim, cfg)

        self.up_blocks = nn.ModuleList()
        self.upsamplers = nn.ModuleList()
        cur = chs[-1]
        for i in reversed(range(len(chs))):
            self.up_blocks.append(RefBlock(cur + chs[i], chs[i], temb_dim, cfg))
            self.upsamplers.append(Upsample(chs[i]) if i > 0 else nn.Identity())
            cur = chs[i]

    def forward(self, frames: torch.Tensor) -> Dict[str, torch.Tensor]:
        """Run [N, C, h, w] clean latents, return block_id -> [N, T, D] spatial-attention inputs."""
        captured: Dict[str, torch.Tensor] = {}
        temb = self.time_embedding(0)
        h = self.conv_in(frames.to(self.conv_in.weight.dtype))
        skips = []
        for i, (block, down) in enumerate(zip(self.down_blocks, self.downsamplers)):
            h = block(h, temb, captured, f"down{i}")
            skips.append(h)
            h = down(h)
        h = self.mid_block(h, temb, captured, "mid")
        for block, up, i in zip(self.up_blocks, self.upsamplers, reversed(range(self.num_levels))):
            h = block(torch.cat([h, skips[i]], dim=1), temb, captured, f"up{i}")
            h = up(h)
        return captured


def extract_reference_features(
    ref_latent: torch.Tensor,
    mf_latents: torch.Tensor,
    reference_net: ReferenceNet,
    schedule: Optional[SegmentSchedule] = None,
) -> ReferenceFeatureCache:
    """Run the reference latent [C, h, w] and abstracted motion latents [n, C, h, w] through the network."""
    if ref_latent.dim() != 3:
        raise ShapeMismatch(f"ref_latent must be [C, h, w], got {tuple(ref_latent.shape)}")
    expect_shape("mf_latents", mf_latents.shape, (-1,) + tuple(ref_latent.shape))
    frames = torch.cat([ref_latent.unsqueeze(0), mf_latents.to(ref_latent.dtype)], dim=0)
    captured = reference_net(frames)
    return ReferenceFeatureCache(
        blocks={block_id: BlockFeatures(ref_feat=feat[0], mf_feats=feat[1:]) for block_id, feat in captured.items()},
        schedule=schedule,
    )


def inject_spatial(
    layer: SpatialAttention,
    block_feat: torch.Tensor,
    cache: Optional[ReferenceFeatureCache],
    block_id: str,
    drop_ref: bool,
) -> torch.Tensor:
    """Spatial attention of [F, T, D] tokens with the cached reference feature of `block_id`."""
    if drop_ref:
        return layer(block_feat)
    if cache is None:
        raise MissingCacheEntry(f"no reference cache while reference is not dropped (block '{block_id}')")
    entry = cache.get(block_id)
    if entry.ref_feat.shape[-1] != block_feat.shape[-1]:
        raise ShapeMismatch(f"block '{block_id}' width {block_feat.shape[-1]} != cached {entry.ref_feat.shape[-1]}")
    return layer(block_feat, entry.ref_feat)

