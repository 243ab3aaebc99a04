import dataclasses
from typing import Any, Optional

import torch

from talking_clip.core.config import ModelConfig
from talking_clip.core.errors import ShapeMismatch, TalkingClipError, expect_shape

AUDIO_WINDOW = 5


@dataclasses.dataclass(frozen=True)
class LatentClip:
    """Per-frame latents of one clip, shape [F, C, h, w]."""

    data: torch.Tensor
    frame_rate: float = 25.0

    def __post_init__(self) -> None:
        if self.data.dim() != 4:
            raise ShapeMismatch(f"LatentClip data must be [F, C, h, w], got {tuple(self.data.shape)}")
        if not bool(torch.isfinite(self.data).all()):
            raise TalkingClipError("LatentClip data contains non-finite values")

    @property
    def num_frames(self) -> int:
        return int(self.data.shape[0])

    def check_against(self, cfg: ModelConfig, num_frames: Optional[int] = None) -> "LatentClip":
        expected_f = cfg.clip_len if num_frames is None else num_frames
        expect_shape(
            "LatentClip",
            self.data.shape,
            (expected_f, cfg.latent_channels, cfg.latent_height, cfg.latent_width),
        )
        return self


@dataclasses.dataclass(frozen=True)
class ConditionBundle:
    """All conditioning inputs of one denoising call.

    `motion_frames` is ordered closest-first: frame 0 is the frame right before the current clip.
    Frames whose `motion_frame_validity` entry is False are forced to zero on construction.
    Setting `drop_ref` also drops the motion frames from temporal attention.
    """

    ref_latent: torch.Tensor
    motion_frames: torch.Tensor
    audio_embed: torch.Tensor
    head_move_var: float = 0.0
    expr_var: float = 0.0
    drop_ref: bool = False
    mask_motion_frames: bool = False
    mask_audio: bool = False
    mask_motion_latents: bool = False
    motion_frame_validity: Optional[torch.Tensor] = None

    def __post_init__(self) -> None:
        if self.ref_latent.dim() != 3:
            raise ShapeMismatch(f"ref_latent must be [C, h, w], got {tuple(self.ref_latent.shape)}")
        c, h, w = self.ref_latent.shape
        expect_shape("motion_frames", self.motion_frames.shape, (-1, c, h, w))
        expect_shape("audio_embed", self.audio_embed.shape, (-1, AUDIO_WINDOW, -1))
        if self.head_move_var < 0 or self.expr_var < 0:
            raise TalkingClipError("motion variances must be nonnegative")

        n_motion = self.motion_frames.shape[0]
        validity = self.motion_frame_validity
        if validity is None:
            validity = torch.ones(n_motion, dtype=torch.bool)
        expect_shape("motion_frame_validity", validity.shape, (n_motion,))
        validity = validity.to(torch.bool)
        if not bool(validity.all()):
            masked = self.motion_frames * validity.view(-1, 1, 1, 1).to(self.motion_frames.dtype)
            object.__setattr__(self, "motion_frames", masked)
        object.__setattr__(self, "motion_frame_validity", validity)

    @property
    def validity(self) -> torch.Tensor:
        assert self.motion_frame_validity is not None
        return self.motion_frame_validity

    @property
    def num_frames(self) -> int:
        return int(self.audio_embed.shape[0])

    def replace(self, **changes: Any) -> "ConditionBundle":
        return dataclasses.replace(self, **changes)

    def check_against(self, cfg: ModelConfig) -> "ConditionBundle":
        latent = (cfg.latent_channels, cfg.latent_height, cfg.latent_width)
        expect_shape("ref_latent", self.ref_latent.shape, latent)
        expect_shape("motion_frames", self.motion_frames.shape, (cfg.motion_frame_len,) + latent)
        expect_shape("audio_embed", self.audio_embed.shape, (-1, AUDIO_WINDOW, cfg.audio_feature_dim))
        return self


def empty_condition(
    cfg: ModelConfig, num_frames: Optional[int] = None, dtype: torch.dtype = torch.float32
) -> ConditionBundle:
    """A bundle with zero latents, zero audio and an all-invalid motion buffer."""
    f = cfg.clip_len if num_frames is None else num_frames
    latent = (cfg.latent_channels, cfg.latent_height, cfg.latent_width)
    return ConditionBundle(
        ref_latent=torch.zeros(latent, dtype=dtype),
        motion_frames=torch.zeros((cfg.motion_frame_len,) + latent, dtype=dtype),
        audio_embed=torch.zeros((f, AUDIO_WINDOW, cfg.audio_feature_dim), dtype=dtype),
        motion_frame_validity=torch.zeros(cfg.motion_frame_len, dtype=torch.bool),
    )
