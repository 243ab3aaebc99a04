"""Training-time condition masking and dropping.

Masking keeps a condition's path alive with all-zero features; dropping removes it. Dropping the
reference also drops the motion frames from temporal attention.
"""

import dataclasses
import logging

import numpy as np

from talking_clip.core.config import DropoutRates
from talking_clip.core.types import ConditionBundle

logger = logging.getLogger("train")


@dataclasses.dataclass(frozen=True)
class DropoutDraw:
    mask_audio: bool
    mask_motion_latents: bool
    drop_ref: bool
    mask_motion_frames: bool


@dataclasses.dataclass(frozen=True)
class SampleStreams:
    """Independent RNG streams of one training sample, keyed by (global seed, sample index).

    Every consumer owns one stream: the dropout flags are independent of what clip sampling draws.
    """

    data: np.random.Generator
    dropout: np.random.Generator
    condition: np.random.Generator
    schedule: np.random.Generator


def sample_streams(seed: int, sample_index: int) -> SampleStreams:
    children = np.random.SeedSequence([seed, sample_index]).spawn(4)
    data, dropout, condition, schedule = (np.random.default_rng(child) for child in children)
    return SampleStreams(data=data, dropout=dropout, condition=condition, schedule=schedule)


def dropout_rng(seed: int, sample_index: int) -> np.random.Generator:
    """Dropout stream of one training sample, independent of batch composition and worker scheduling."""
    return sample_streams(seed, sample_index).dropout


def draw_dropout(rng: np.random.Generator, rates: DropoutRates) -> DropoutDraw:
    u = rng.random(4)
    return DropoutDraw(
        mask_audio=bool(u[0] < rates.audio),
        mask_motion_latents=bool(u[1] < rates.motion_latents),
        drop_ref=bool(u[2] < rates.ref_drop),
        mask_motion_frames=bool(u[3] < rates.mf_mask),
    )


def apply_dropout(bundle: ConditionBundle, rng: np.random.Generator, rates: DropoutRates) -> ConditionBundle:
    """Set the mask/drop flags of `bundle` by four independent Bernoulli draws.

    The flags are read by the model before any feature extraction, so a dropped reference is never
    run through the reference network.
    """
    draw = draw_dropout(rng, rates)
    if not (draw.mask_audio or draw.mask_motion_latents or draw.drop_ref or draw.mask_motion_frames):
        return bundle
    return bundle.replace(
        mask_audio=bundle.mask_audio or draw.mask_audio,
        mask_motion_latents=bundle.mask_motion_latents or draw.mask_motion_latents,
        drop_ref=bundle.drop_ref or draw.drop_ref,
        mask_motion_frames=bundle.mask_motion_frames or draw.mask_motion_frames,
    )


def log_rates(rates: DropoutRates) -> None:
    logger.info(
        "Condition dropout: audio mask %.2f, motion latent mask %.2f, reference drop %.2f, motion frame mask %.2f",
        rates.audio,
        rates.motion_latents,
        rates.ref_drop,
        rates.mf_mask,
    )
