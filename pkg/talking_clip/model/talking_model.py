import logging
from typing import Dict, Optional, Union

import numpy as np
import torch
from torch import nn

from talking_clip.core.config import ModelConfig
from talking_clip.core.types import ConditionBundle, LatentClip
from talking_clip.model.audio_to_latents import MotionLatentBank, TaggedCondition, audio_condition, build_bank
from talking_clip.model.denoiser import AUDIO_GROUPS, TEMPORAL_GROUPS, Denoiser, DenoiserInputs
from talking_clip.model.reference_net import ReferenceFeatureCache, ReferenceNet, extract_reference_features
from talking_clip.temporal_segment.segment import (
    SegmentSchedule,
    abstract_motion_frames,
    abstract_validity,
    schedule_from_config,
)

logger = logging.getLogger("model")


class TalkingClipModel(nn.Module):
    """Reference network, denoiser and audio-to-latents bank of one training stage.

    Stage 1 has neither temporal layers nor audio layers; stage 2 is the full model.
    """

    def __init__(self, cfg: ModelConfig, stage: int = 2) -> None:
        super().__init__()
        if stage not in (1, 2):
            raise ValueError(f"stage must be 1 or 2, got {stage}")
        self.cfg = cfg
        self.stage = stage
        full = stage == 2
        self.reference_net = ReferenceNet(cfg)
        self.denoiser = Denoiser(cfg, full=full)
        self.audio_to_latents: Optional[MotionLatentBank] = (
            build_bank(cfg) if full and cfg.use_audio_to_latents else None
        )
        self.segment_schedule: SegmentSchedule = schedule_from_config(cfg)

    def draw_schedule(self, rng: Optional[np.random.Generator] = None) -> SegmentSchedule:
        """Segment schedule of one sample; `random` abstraction draws a fresh one from `rng`."""
        if rng is not None and self.cfg.tsm_enabled and self.cfg.tsm_strategy == "random":
            return schedule_from_config(self.cfg, rng)
        return self.segment_schedule

    def reference_features(
        self, cond: ConditionBundle, rng: Optional[np.random.Generator] = None
    ) -> Optional[ReferenceFeatureCache]:
        """Reference-network features, None when the reference (and with it the motion frames) is dropped."""
        if cond.drop_ref:
            return None
        if self.stage == 1:
            return extract_reference_features(cond.ref_latent, cond.motion_frames[:0], self.reference_net)
        schedule = self.draw_schedule(rng)
        mf_latents = abstract_motion_frames(cond.motion_frames, schedule, validity=cond.validity)
        return extract_reference_features(cond.ref_latent, mf_latents, self.reference_net, schedule)

    def motion_latent(
        self, cond: ConditionBundle, condition: Optional[TaggedCondition] = None
    ) -> Optional[torch.Tensor]:
        if self.audio_to_latents is None:
            return None
        latent = self.audio_to_latents(condition if condition is not None else audio_condition(cond))
        if cond.mask_motion_latents:
            latent = torch.zeros_like(latent)
        return latent

    def denoise(
        self,
        z_t: torch.Tensor,
        t: Union[int, torch.Tensor],
        cond: ConditionBundle,
        motion_latent: Optional[torch.Tensor] = None,
        cache: Optional[ReferenceFeatureCache] = None,
    ) -> torch.Tensor:
        """Noise prediction; `cache` is computed from `cond` when not given and the reference is kept."""
        if cache is None:
            cache = self.reference_features(cond)
        mf_valid = None
        if self.stage == 2 and cache is not None:
            mf_valid = abstract_validity(cond.validity, cache.schedule or self.segment_schedule)
        inputs = DenoiserInputs(
            audio_embed=cond.audio_embed,
            cache=cache,
            drop_ref=cond.drop_ref,
            mask_motion_frames=cond.mask_motion_frames,
            mask_audio=cond.mask_audio,
            mf_valid=mf_valid,
        )
        return self.denoiser(z_t, t, inputs, motion_latent)

    def predict_noise(
        self,
        z_t: torch.Tensor,
        t: Union[int, torch.Tensor],
        cond: ConditionBundle,
        condition: Optional[TaggedCondition] = None,
        cache: Optional[ReferenceFeatureCache] = None,
    ) -> torch.Tensor:
        """Noise prediction with the motion latent derived from `condition` (audio by default)."""
        return self.denoise(z_t, t, cond, self.motion_latent(cond, condition), cache)

    def forward(
        self,
        z_t: torch.Tensor,
        t: Union[int, torch.Tensor],
        cond: ConditionBundle,
        condition: Optional[TaggedCondition] = None,
    ) -> torch.Tensor:
        return self.predict_noise(z_t, t, cond, condition)

    def parameter_groups(self) -> Dict[str, int]:
        """Parameter count per group, for logging."""
        groups = {"reference": 0, "spatial": 0, "temporal": 0, "audio": 0}
        for name, param in self.named_parameters():
            if name.startswith("reference_net."):
                groups["reference"] += param.numel()
            elif any(g in name for g in TEMPORAL_GROUPS):
                groups["temporal"] += param.numel()
            elif any(g in name for g in AUDIO_GROUPS):
                groups["audio"] += param.numel()
            else:
                groups["spatial"] += param.numel()
        return groups


def denoise(
    z_t: LatentClip,
    t: int,
    cond: ConditionBundle,
    motion_latent: Optional[torch.Tensor],
    model: TalkingClipModel,
    cache: Optional[ReferenceFeatureCache] = None,
) -> LatentClip:
    """Predicted noise for a noisy clip."""
    eps = model.denoise(z_t.data, t, cond, motion_latent, cache)
    return LatentClip(eps, frame_rate=z_t.frame_rate)
