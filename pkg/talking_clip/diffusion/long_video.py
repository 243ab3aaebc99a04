"""Autoregressive clip loop for long videos.

Clip k is conditioned on the last `motion_frame_len` generated frames, ordered closest-first. Buffer
slots that have not been generated yet are invalid and carry zero latents.
"""

import dataclasses
import logging
from typing import List, Optional, Tuple

import numpy as np
import torch

from talking_clip.core.config import GuidanceConfig
from talking_clip.core.errors import ShapeMismatch
from talking_clip.core.schedule import DiffusionSchedule
from talking_clip.core.types import ConditionBundle, LatentClip
from talking_clip.diffusion.noising import NoisePredictor
from talking_clip.diffusion.sampler import ddim_sample
from talking_clip.model.audio_to_latents import AUDIO_TAG, condition_from_bundle

logger = logging.getLogger("sample")


@dataclasses.dataclass(frozen=True)
class LongVideoSource:
    """Conditions of a whole video: one reference latent and per-frame audio windows."""

    ref_latent: torch.Tensor  # [C, h, w]
    audio_embed: torch.Tensor  # [n_frames, 5, A]
    head_move_var: float = 0.0
    expr_var: float = 0.0
    drive: str = AUDIO_TAG

    def clip_audio(self, clip_index: int, clip_len: int) -> torch.Tensor:
        start = clip_index * clip_len
        if start + clip_len > self.audio_embed.shape[0]:
            raise ShapeMismatch(
                f"clip {clip_index} needs audio frames up to {start + clip_len}, have {self.audio_embed.shape[0]}"
            )
        return self.audio_embed[start : start + clip_len]


class MotionFrameBuffer:
    """The last `capacity` generated frame latents, index 0 being the most recent frame."""

    def __init__(self, capacity: int, latent_shape: Tuple[int, ...], dtype: torch.dtype) -> None:
        self.frames = torch.zeros((capacity,) + tuple(latent_shape), dtype=dtype)
        self.validity = torch.zeros(capacity, dtype=torch.bool)

    def push_clip(self, clip: torch.Tensor) -> None:
        """Append a chronologically ordered clip [F, C, h, w]."""
        capacity = self.frames.shape[0]
        newest_first = clip.flip(0).to(self.frames.dtype)
        self.frames = torch.cat([newest_first, self.frames], dim=0)[:capacity]
        fresh = torch.ones(clip.shape[0], dtype=torch.bool)
        self.validity = torch.cat([fresh, self.validity], dim=0)[:capacity]


def generate_long_video(
    n_clips: int,
    source: LongVideoSource,
    model: NoisePredictor,
    schedule: DiffusionSchedule,
    clip_len: int,
    motion_frame_len: int,
    seed: int = 0,
    steps: int = 25,
    guidance: Optional[GuidanceConfig] = None,
) -> List[LatentClip]:
    """Generate `n_clips` consecutive clips, n_clips * clip_len frames in total.

    Start noise and, for random abstraction, the segment schedule of every clip come from `seed`.
    """
    if n_clips < 0:
        raise ShapeMismatch(f"n_clips must be >= 0, got {n_clips}")
    dtype = source.ref_latent.dtype
    latent_shape = tuple(source.ref_latent.shape)
    buffer = MotionFrameBuffer(motion_frame_len, latent_shape, dtype)
    generator = torch.Generator().manual_seed(seed)
    schedule_rng = np.random.default_rng(seed)

    clips: List[LatentClip] = []
    for k in range(n_clips):
        cond = ConditionBundle(
            ref_latent=source.ref_latent,
            motion_frames=buffer.frames,
            audio_embed=source.clip_audio(k, clip_len),
            head_move_var=source.head_move_var,
            expr_var=source.expr_var,
            motion_frame_validity=buffer.validity,
        )
        noise = torch.randn((clip_len,) + latent_shape, generator=generator, dtype=dtype)
        condition = condition_from_bundle(cond, source.drive)
        clip = ddim_sample(
            cond,
            model,
            schedule,
            steps,
            guidance=guidance,
            condition=condition,
            noise=noise,
            schedule_rng=schedule_rng,
        )
        logger.info("Generated clip %d/%d (%d valid motion frames)", k + 1, n_clips, int(buffer.validity.sum()))
        buffer.push_clip(clip.data)
        clips.append(clip)
    return clips


def concat_clips(clips: List[LatentClip]) -> torch.Tensor:
    if len(clips) == 0:
        raise ShapeMismatch("no clips to concatenate")
    return torch.cat([c.data for c in clips], dim=0)
