import dataclasses
import logging
from typing import Optional, Protocol, Sequence, Union

import numpy as np
import torch

from talking_clip.core.errors import NonFiniteLoss, ShapeMismatch
from talking_clip.core.schedule import DiffusionSchedule
from talking_clip.core.types import ConditionBundle, LatentClip
from talking_clip.model.audio_to_latents import TaggedCondition
from talking_clip.model.reference_net import ReferenceFeatureCache

logger = logging.getLogger("train")


class NoisePredictor(Protocol):
    def reference_features(
        self, cond: ConditionBundle, rng: Optional[np.random.Generator] = None
    ) -> Optional[ReferenceFeatureCache]:
        ...

    def predict_noise(
        self,
        z_t: torch.Tensor,
        t: Union[int, torch.Tensor],
        cond: ConditionBundle,
        condition: Optional[TaggedCondition] = None,
        cache: Optional[ReferenceFeatureCache] = None,
    ) -> torch.Tensor:
        ...


def _noise_tensor(z_0: torch.Tensor, t: int, eps: torch.Tensor, schedule: DiffusionSchedule) -> torch.Tensor:
    if z_0.shape != eps.shape:
        raise ShapeMismatch(f"z_0 {tuple(z_0.shape)} and eps {tuple(eps.shape)} differ")
    alpha_bar = schedule.alpha_cumprod[schedule.check_t(t)]
    return (alpha_bar.sqrt() * z_0 + (1.0 - alpha_bar).sqrt() * eps).to(z_0.dtype)


def add_noise(z_0: LatentClip, t: int, eps: LatentClip, schedule: DiffusionSchedule) -> LatentClip:
    """z_t = sqrt(alpha_bar_t) z_0 + sqrt(1 - alpha_bar_t) eps."""
    return LatentClip(_noise_tensor(z_0.data, t, eps.data, schedule), frame_rate=z_0.frame_rate)


def recover_z0(z_t: LatentClip, t: int, eps: LatentClip, schedule: DiffusionSchedule) -> LatentClip:
    alpha_bar = schedule.alpha_cumprod[schedule.check_t(t)]
    data = (z_t.data - (1.0 - alpha_bar).sqrt() * eps.data) / alpha_bar.sqrt()
    return LatentClip(data.to(z_t.data.dtype), frame_rate=z_t.frame_rate)


@dataclasses.dataclass(frozen=True)
class TrainingSample:
    """One clip of a training batch. `cond` has already been through condition dropout."""

    z_0: torch.Tensor  # [F, C, h, w]
    cond: ConditionBundle
    condition: Optional[TaggedCondition] = None
    index: int = 0
    schedule_rng: Optional[np.random.Generator] = None


def training_loss(
    model: NoisePredictor,
    batch: Sequence[TrainingSample],
    schedule: DiffusionSchedule,
    generator: torch.Generator,
) -> torch.Tensor:
    """Mean squared error between the sampled noise and the predicted noise, averaged over the batch."""
    if len(batch) == 0:
        raise ShapeMismatch("training batch is empty")
    losses = []
    timesteps = torch.randint(0, schedule.num_steps, (len(batch),), generator=generator)
    for sample, t in zip(batch, timesteps.tolist()):
        eps = torch.randn(sample.z_0.shape, generator=generator, dtype=sample.z_0.dtype)
        z_t = _noise_tensor(sample.z_0, t, eps, schedule)
        cache = model.reference_features(sample.cond, sample.schedule_rng)
        pred = model.predict_noise(z_t, t, sample.cond, sample.condition, cache)
        losses.append(torch.mean((pred - eps) ** 2))
    loss = torch.stack(losses).mean()

    if not bool(torch.isfinite(loss)):
        for sample, t in zip(batch, timesteps.tolist()):
            logger.error(
                "Non-finite loss: sample %d, t=%d, drop_ref=%s, mask_audio=%s, mask_mf=%s, mask_latents=%s",
                sample.index,
                t,
                sample.cond.drop_ref,
                sample.cond.mask_audio,
                sample.cond.mask_motion_frames,
                sample.cond.mask_motion_latents,
            )
        raise NonFiniteLoss(f"training loss is {loss.item()}")
    return loss
