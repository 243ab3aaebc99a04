"""DDIM sampling with three-pass classifier-free guidance.

Every step predicts the noise three times on the same latent: with all conditions (e_audio), with the
audio and motion latent masked (e_ref), and additionally with the reference dropped (e_base), which
also drops the motion frames.
"""

import logging
from typing import Callable, List, Optional, Tuple

import numpy as np
import torch

from talking_clip.core.config import GuidanceConfig
from talking_clip.core.errors import ConfigError, ShapeMismatch
from talking_clip.core.schedule import DiffusionSchedule
from talking_clip.core.types import ConditionBundle, LatentClip
from talking_clip.diffusion.noising import NoisePredictor
from talking_clip.model.audio_to_latents import TaggedCondition
from talking_clip.model.reference_net import ReferenceFeatureCache
from talking_clip.utils.debug_timer import time_function

logger = logging.getLogger("sample")

StepCallback = Callable[[int, int, torch.Tensor], None]


def combine_noise(
    e_audio: torch.Tensor, e_ref: torch.Tensor, e_base: torch.Tensor, audio_ratio: float = 5.0, ref_ratio: float = 3.0
) -> torch.Tensor:
    """audio_ratio * (e_audio - e_ref) + ref_ratio * (e_ref - e_base) + e_base."""
    if not e_audio.shape == e_ref.shape == e_base.shape:
        raise ShapeMismatch(
            f"guidance predictions differ in shape: {tuple(e_audio.shape)}, "
            f"{tuple(e_ref.shape)}, {tuple(e_base.shape)}"
        )
    return audio_ratio * (e_audio - e_ref) + ref_ratio * (e_ref - e_base) + e_base


def cfg_combine(
    e_audio: LatentClip, e_ref: LatentClip, e_base: LatentClip, audio_ratio: float = 5.0, ref_ratio: float = 3.0
) -> LatentClip:
    data = combine_noise(e_audio.data, e_ref.data, e_base.data, audio_ratio, ref_ratio)
    return LatentClip(data, frame_rate=e_audio.frame_rate)


def guidance_conditions(cond: ConditionBundle) -> Tuple[ConditionBundle, ConditionBundle, ConditionBundle]:
    """(full, audio masked, audio masked and reference dropped) bundles."""
    ref_only = cond.replace(mask_audio=True, mask_motion_latents=True)
    return cond, ref_only, ref_only.replace(drop_ref=True)


def ddim_timesteps(num_train_steps: int, steps: int) -> List[int]:
    """Trailing timestep spacing, starting at T-1."""
    if not 0 < steps <= num_train_steps:
        raise ConfigError(f"sampling steps must be in [1, {num_train_steps}], got {steps}")
    return [int(round(num_train_steps - k * num_train_steps / steps)) - 1 for k in range(steps)]


def guided_noise(
    model: NoisePredictor,
    z_t: torch.Tensor,
    t: int,
    cond: ConditionBundle,
    guidance: GuidanceConfig,
    condition: Optional[TaggedCondition] = None,
    cache: Optional[ReferenceFeatureCache] = None,
) -> torch.Tensor:
    """Guided noise of one step.

    `cache` holds the reference features of `cond` and serves the e_audio and e_ref passes. e_base drops
    the reference and never reads it.
    """
    full, ref_only, base = guidance_conditions(cond)
    e_base = model.predict_noise(z_t, t, base, condition)
    if guidance.audio_ratio == 0 and guidance.ref_ratio == 0:
        return e_base
    e_ref = model.predict_noise(z_t, t, ref_only, condition, cache)
    e_audio = e_ref if guidance.audio_ratio == 0 else model.predict_noise(z_t, t, full, condition, cache)
    return combine_noise(e_audio, e_ref, e_base, guidance.audio_ratio, guidance.ref_ratio)


def initial_noise(shape: Tuple[int, ...], seed: int, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    generator = torch.Generator().manual_seed(seed)
    return torch.randn(shape, generator=generator, dtype=dtype)


@time_function("ddim sampling")
def ddim_sample(
    cond: ConditionBundle,
    model: NoisePredictor,
    schedule: DiffusionSchedule,
    steps: int = 25,
    seed: int = 0,
    guidance: Optional[GuidanceConfig] = None,
    condition: Optional[TaggedCondition] = None,
    noise: Optional[torch.Tensor] = None,
    schedule_rng: Optional[np.random.Generator] = None,
    callback: Optional[StepCallback] = None,
) -> LatentClip:
    """Deterministic (eta = 0) DDIM trajectory from seeded gaussian noise to clean latents.

    Reference features are extracted once, with the segment schedule drawn from `schedule_rng` (seeded
    from `seed` when absent), and reused at every step.
    """
    guidance = guidance if guidance is not None else GuidanceConfig()
    shape = (cond.num_frames,) + tuple(cond.ref_latent.shape)
    z = initial_noise(shape, seed, cond.ref_latent.dtype) if noise is None else noise.clone()
    if tuple(z.shape) != shape:
        raise ShapeMismatch(f"start noise {tuple(z.shape)} does not match clip shape {shape}")

    timesteps = ddim_timesteps(schedule.num_steps, steps)
    alpha_cumprod = schedule.alpha_cumprod
    with torch.no_grad():
        rng = schedule_rng if schedule_rng is not None else np.random.default_rng(seed)
        cache = model.reference_features(cond, rng)
        for i, t in enumerate(timesteps):
            e = guided_noise(model, z, t, cond, guidance, condition, cache).to(torch.float64)
            alpha_bar = alpha_cumprod[t]
            last = i + 1 == len(timesteps)
            alpha_bar_prev = alpha_cumprod.new_tensor(1.0) if last else alpha_cumprod[timesteps[i + 1]]
            z0_pred = (z.to(torch.float64) - (1.0 - alpha_bar).sqrt() * e) / alpha_bar.sqrt()
            z = (alpha_bar_prev.sqrt() * z0_pred + (1.0 - alpha_bar_prev).sqrt() * e).to(z.dtype)
            if callback is not None:
                callback(i, t, z)
    logger.debug("Sampled %d frames in %d steps", shape[0], steps)
    return LatentClip(z)