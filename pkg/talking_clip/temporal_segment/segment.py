"""Temporal segment module.

Splits the motion-frame buffer into segments that grow geometrically with the distance from the
current clip and abstracts every segment into `stride` representative frames. Raw frame 0 is the
frame closest to the current clip.

Slot `i` belongs to segment `k = i // stride` and owns the bucket of `ratio**k` raw frames starting at
`sum(stride * ratio**j for j < k) + ratio**k * (i % stride)`.
"""

import dataclasses
from typing import List, Optional, Tuple

import numpy as np
import torch

from talking_clip.core.config import TSM_STRATEGIES, ModelConfig
from talking_clip.core.errors import ConfigError, NonPositiveDim, ScheduleOverrun, ShapeMismatch


@dataclasses.dataclass(frozen=True)
class SegmentSchedule:
    indices: np.ndarray  # [n_seg * s] raw index per slot
    segment_of: np.ndarray  # [n_seg * s] segment k per slot
    bucket_start: np.ndarray
    bucket_len: np.ndarray
    stride: int
    expand_ratio: int
    segments: int
    strategy: str = "uniform"

    @property
    def num_slots(self) -> int:
        return int(self.indices.shape[0])

    @property
    def coverage(self) -> int:
        """Raw frames spanned by all segments."""
        return segment_coverage(self.stride, self.expand_ratio, self.segments)

    def segment_range(self, k: int) -> Tuple[int, int]:
        """Raw index range [lo, hi) of segment k."""
        lo = segment_coverage(self.stride, self.expand_ratio, k)
        return lo, lo + self.stride * self.expand_ratio**k

    def max_raw_index(self) -> int:
        if self.strategy == "mean":
            return int((self.bucket_start + self.bucket_len).max()) - 1
        return int(self.indices.max())


def segment_coverage(stride: int, expand_ratio: int, segments: int) -> int:
    return sum(stride * expand_ratio**i for i in range(segments))


def build_schedule(
    stride: int,
    expand_ratio: int,
    segments: int,
    strategy: str = "uniform",
    rng: Optional[np.random.Generator] = None,
    motion_frame_len: Optional[int] = None,
) -> SegmentSchedule:
    """Build the slot -> raw motion frame index map.

    `uniform` picks the first frame of every bucket, `random` draws one frame per bucket from `rng`
    and `mean` keeps the bucket bounds so abstraction can average them.
    """
    for name, value in (("stride", stride), ("expand_ratio", expand_ratio), ("segments", segments)):
        if value <= 0:
            raise NonPositiveDim(f"{name} must be > 0, got {value}")
    if strategy not in TSM_STRATEGIES:
        raise ConfigError(f"unknown abstraction strategy '{strategy}', expected one of {TSM_STRATEGIES}")
    if strategy == "random" and rng is None:
        raise ConfigError("random abstraction needs a random generator")

    slots = np.arange(stride * segments, dtype=np.int64)
    segment_of = slots // stride
    step = np.asarray(expand_ratio, dtype=np.int64) ** segment_of
    offsets = np.array([segment_coverage(stride, expand_ratio, int(k)) for k in range(segments)], dtype=np.int64)
    bucket_start = offsets[segment_of] + step * (slots % stride)

    if strategy == "random":
        assert rng is not None
        indices = bucket_start + rng.integers(0, step)
    else:
        indices = bucket_start.copy()

    schedule = SegmentSchedule(
        indices=indices,
        segment_of=segment_of,
        bucket_start=bucket_start,
        bucket_len=step,
        stride=stride,
        expand_ratio=expand_ratio,
        segments=segments,
        strategy=strategy,
    )
    if motion_frame_len is not None and schedule.max_raw_index() >= motion_frame_len:
        raise ScheduleOverrun(
            f"schedule reaches raw frame {schedule.max_raw_index()} but only {motion_frame_len} motion frames exist"
        )
    return schedule


def schedule_from_config(cfg: ModelConfig, rng: Optional[np.random.Generator] = None) -> SegmentSchedule:
    """Schedule used by a model; the plain closest-frames schedule when the module is disabled."""
    if not cfg.tsm_enabled:
        return build_schedule(cfg.plain_motion_frames, 1, 1, "uniform", motion_frame_len=cfg.motion_frame_len)
    if cfg.tsm_strategy == "random" and rng is None:
        rng = np.random.default_rng(cfg.seed)
    return build_schedule(
        cfg.tsm_stride,
        cfg.tsm_expand_ratio,
        cfg.tsm_segments,
        cfg.tsm_strategy,
        rng=rng,
        motion_frame_len=cfg.motion_frame_len,
    )


def abstract_motion_frames(
    motion_frames: torch.Tensor,
    schedule: SegmentSchedule,
    strategy: Optional[str] = None,
    validity: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Recombine raw motion frames [M, ...] into abstracted frames [n_seg * s, ...].

    With `validity` [M], a `mean` slot averages only the valid frames of its bucket and is zero when
    none is valid.
    """
    strategy = strategy or schedule.strategy
    if motion_frames.dim() < 1 or motion_frames.shape[0] <= schedule.max_raw_index():
        raise ShapeMismatch(
            f"need more than {schedule.max_raw_index()} motion frames, got {tuple(motion_frames.shape)}"
        )

    if strategy == "mean":
        slots = []
        for start, length in zip(schedule.bucket_start, schedule.bucket_len):
            bucket = motion_frames[int(start) : int(start + length)]
            if validity is None:
                slots.append(bucket.mean(dim=0))
                continue
            keep = validity[int(start) : int(start + length)].to(bucket.dtype)
            weights = keep.view((-1,) + (1,) * (bucket.dim() - 1))
            slots.append((bucket * weights).sum(dim=0) / keep.sum().clamp(min=1.0))
        return torch.stack(slots)
    index = torch.as_tensor(schedule.indices, dtype=torch.long)
    return motion_frames.index_select(0, index)


def abstract_validity(validity: torch.Tensor, schedule: SegmentSchedule) -> torch.Tensor:
    """Validity of each abstracted slot; a mean bucket is valid if any of its frames is."""
    if schedule.strategy == "mean":
        return torch.stack(
            [
                validity[int(start) : int(start + length)].any()
                for start, length in zip(schedule.bucket_start, schedule.bucket_len)
            ]
        )
    return validity.index_select(0, torch.as_tensor(schedule.indices, dtype=torch.long))


def format_schedule_table(schedule: SegmentSchedule) -> List[str]:
    """One `slot k raw_index` line per slot."""
    return [f"{slot} {int(k)} {int(raw)}" for slot, (k, raw) in enumerate(zip(schedule.segment_of, schedule.indices))]
