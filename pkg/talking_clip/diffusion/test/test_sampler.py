from typing import Any, Dict, List, Tuple, Union

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from talking_clip.conftest import ConditionFactory, ReferenceFreePredictor
from talking_clip.core.config import GuidanceConfig, ModelConfig
from talking_clip.core.errors import ConfigError, ShapeMismatch
from talking_clip.core.schedule import DiffusionSchedule, linear_schedule, schedule_for
from talking_clip.core.types import ConditionBundle, LatentClip
from talking_clip.diffusion.sampler import (
    cfg_combine,
    combine_noise,
    ddim_sample,
    ddim_timesteps,
    guidance_conditions,
    guided_noise,
    initial_noise,
)
from talking_clip.model.reference_net import ReferenceNet
from talking_clip.model.talking_model import TalkingClipModel


class PointMassPredictor(ReferenceFreePredictor):
    """Exact noise predictor for data concentrated on a single latent `target`."""

    def __init__(self, target: torch.Tensor, schedule: DiffusionSchedule) -> None:
        self.target = target
        self.schedule = schedule

    def predict_noise(
        self,
        z_t: torch.Tensor,
        t: Union[int, torch.Tensor],
        cond: ConditionBundle,
        condition: Any = None,
        cache: Any = None,
    ) -> torch.Tensor:
        alpha_bar = self.schedule.alpha_cumprod[int(t)]
        return (z_t - alpha_bar.sqrt() * self.target) / (1.0 - alpha_bar).sqrt()


class RecordingPredictor(ReferenceFreePredictor):
    """Linear predictor that remembers the mask flags of every call."""

    def __init__(self) -> None:
        self.calls: List[Tuple[bool, bool, bool, bool]] = []

    def predict_noise(
        self,
        z_t: torch.Tensor,
        t: Union[int, torch.Tensor],
        cond: ConditionBundle,
        condition: Any = None,
        cache: Any = None,
    ) -> torch.Tensor:
        self.calls.append((cond.mask_audio, cond.mask_motion_latents, cond.drop_ref, cond.mask_motion_frames))
        offset = 0.0 if cond.drop_ref else 1.0
        return 0.5 * z_t + offset + (0.0 if cond.mask_audio else 2.0)


def scalar(value: float) -> torch.Tensor:
    return torch.tensor([value], dtype=torch.float64)


def test_combine_examples() -> None:
    assert combine_noise(scalar(1), scalar(0), scalar(0)).item() == 5.0
    assert combine_noise(scalar(0), scalar(1), scalar(0)).item() == -2.0
    v = torch.randn(3, 4, dtype=torch.float64)
    assert torch.equal(combine_noise(v, v, v), v)
    with pytest.raises(ShapeMismatch):
        combine_noise(scalar(0), scalar(0), torch.zeros(2, dtype=torch.float64))


def test_combine_clips(toy_cfg: ModelConfig) -> None:
    g = torch.Generator().manual_seed(0)
    a, r, b = (torch.randn(4, 4, 8, 8, generator=g, dtype=torch.float64) for _ in range(3))
    out = cfg_combine(LatentClip(a), LatentClip(r), LatentClip(b))
    assert torch.equal(out.data, 5 * (a - r) + 3 * (r - b) + b)
    assert out.check_against(toy_cfg).num_frames == 4


@settings(max_examples=50, deadline=None)
@given(
    st.floats(-10, 10),
    st.floats(-10, 10),
    st.floats(-10, 10),
    st.floats(-10, 10),
    st.floats(0, 10),
    st.floats(0, 10),
)
def test_combine_commutes_with_shift(
    e_audio: float, e_ref: float, e_base: float, shift: float, audio_ratio: float, ref_ratio: float
) -> None:
    plain = combine_noise(scalar(e_audio), scalar(e_ref), scalar(e_base), audio_ratio, ref_ratio)
    shifted = combine_noise(
        scalar(e_audio + shift), scalar(e_ref + shift), scalar(e_base + shift), audio_ratio, ref_ratio
    )
    assert abs(shifted.item() - plain.item() - shift) < 1e-9


def test_guidance_conditions(tiny_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    full, ref_only, base = guidance_conditions(condition_factory(tiny_cfg))
    assert not (full.mask_audio or full.mask_motion_latents or full.drop_ref)
    assert ref_only.mask_audio and ref_only.mask_motion_latents and not ref_only.drop_ref
    assert base.mask_audio and base.mask_motion_latents and base.drop_ref


def test_guided_noise_passes(tiny_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    cond = condition_factory(tiny_cfg, dtype=torch.float64)
    z = torch.ones(3, 2, 4, 4, dtype=torch.float64)

    predictor = RecordingPredictor()
    out = guided_noise(predictor, z, 5, cond, GuidanceConfig(5.0, 3.0))
    assert len(predictor.calls) == 3
    # e_audio - e_ref = 2, e_ref - e_base = 1
    assert torch.allclose(out, 0.5 * z + 5 * 2 + 3 * 1)

    base_only = RecordingPredictor()
    out = guided_noise(base_only, z, 5, cond, GuidanceConfig(0.0, 0.0))
    assert base_only.calls == [(True, True, True, False)]
    assert torch.equal(out, 0.5 * z)


def test_timesteps() -> None:
    steps = ddim_timesteps(1000, 25)
    assert len(steps) == 25
    assert steps[0] == 999 and steps[-1] == 39
    assert all(a > b for a, b in zip(steps, steps[1:]))
    assert ddim_timesteps(50, 50) == list(range(49, -1, -1))
    assert ddim_timesteps(50, 1) == [49]
    for bad in (0, 51):
        with pytest.raises(ConfigError):
            ddim_timesteps(50, bad)


def test_single_step_is_clean_latent_prediction(tiny_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    schedule = schedule_for(tiny_cfg)
    cond = condition_factory(tiny_cfg, dtype=torch.float64)
    predictor = RecordingPredictor()
    noise = initial_noise((3, 2, 4, 4), seed=11, dtype=torch.float64)
    out = ddim_sample(cond, predictor, schedule, steps=1, guidance=GuidanceConfig(0.0, 0.0), noise=noise)

    alpha_bar = schedule.alpha_cumprod[tiny_cfg.noise_steps - 1]
    expected = (noise - (1 - alpha_bar).sqrt() * 0.5 * noise) / alpha_bar.sqrt()
    assert torch.allclose(out.data, expected, atol=1e-12)


def test_full_trajectory_matches_closed_form(tiny_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    schedule = schedule_for(tiny_cfg)
    num_steps = tiny_cfg.noise_steps
    cond = condition_factory(tiny_cfg, dtype=torch.float64)
    target = torch.linspace(-1.0, 1.0, 3 * 2 * 4 * 4, dtype=torch.float64).reshape(3, 2, 4, 4)
    noise = initial_noise((3, 2, 4, 4), seed=5, dtype=torch.float64)

    alpha_bar = schedule.alpha_cumprod
    start = alpha_bar[num_steps - 1]
    eps_0 = (noise - start.sqrt() * target) / (1.0 - start).sqrt()

    trajectory: List[Tuple[int, torch.Tensor]] = []
    out = ddim_sample(
        cond,
        PointMassPredictor(target, schedule),
        schedule,
        steps=num_steps,
        noise=noise,
        callback=lambda i, t, z: trajectory.append((t, z.clone())),
    )
    assert len(trajectory) == num_steps
    for t, z in trajectory[:-1]:
        prev = alpha_bar[t - 1]
        assert torch.allclose(z, prev.sqrt() * target + (1.0 - prev).sqrt() * eps_0, atol=1e-5)
    assert torch.allclose(out.data, target, atol=1e-5)


def test_sampling_is_deterministic(
    random_tiny_model: TalkingClipModel, tiny_cfg: ModelConfig, condition_factory: ConditionFactory
) -> None:
    schedule = linear_schedule(tiny_cfg.noise_steps)
    cond = condition_factory(tiny_cfg, dtype=torch.float64)
    first = ddim_sample(cond, random_tiny_model, schedule, steps=3, seed=4)
    second = ddim_sample(cond, random_tiny_model, schedule, steps=3, seed=4)
    other = ddim_sample(cond, random_tiny_model, schedule, steps=3, seed=5)
    assert torch.equal(first.data, second.data)
    assert not torch.equal(first.data, other.data)
    assert first.check_against(tiny_cfg).num_frames == 3


def test_start_noise_shape(tiny_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    cond = condition_factory(tiny_cfg, dtype=torch.float64)
    with pytest.raises(ShapeMismatch):
        ddim_sample(cond, RecordingPredictor(), schedule_for(tiny_cfg), steps=2, noise=torch.zeros(2, 2, 4, 4))


class UncachedModel(ReferenceFreePredictor):
    """Hands out no reference cache, so the wrapped model extracts features on every call."""

    def __init__(self, model: TalkingClipModel) -> None:
        self.model = model

    def predict_noise(
        self,
        z_t: torch.Tensor,
        t: Union[int, torch.Tensor],
        cond: ConditionBundle,
        condition: Any = None,
        cache: Any = None,
    ) -> torch.Tensor:
        return self.model.predict_noise(z_t, t, cond, condition)


def test_reference_features_extracted_once_per_sample(
    random_tiny_model: TalkingClipModel,
    tiny_cfg: ModelConfig,
    condition_factory: ConditionFactory,
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    schedule = linear_schedule(tiny_cfg.noise_steps)
    cond = condition_factory(tiny_cfg, dtype=torch.float64)
    expected = ddim_sample(cond, UncachedModel(random_tiny_model), schedule, steps=5, seed=2)

    calls: List[int] = []
    forward = ReferenceNet.forward

    def counting_forward(self: ReferenceNet, frames: torch.Tensor) -> Dict[str, torch.Tensor]:
        calls.append(frames.shape[0])
        return forward(self, frames)

    monkeypatch.setattr(ReferenceNet, "forward", counting_forward)
    out = ddim_sample(cond, random_tiny_model, schedule, steps=5, seed=2, guidance=GuidanceConfig(5.0, 3.0))
    assert len(calls) == 1
    assert torch.allclose(out.data, expected.data, atol=1e-12)

    calls.clear()
    ddim_sample(cond.replace(drop_ref=True), random_tiny_model, schedule, steps=5, seed=2)
    assert calls == []
