import logging
from typing import Any, Union

import pytest
import torch

from talking_clip.conftest import ConditionFactory, ReferenceFreePredictor
from talking_clip.core.config import ModelConfig
from talking_clip.core.errors import NonFiniteLoss, ShapeMismatch, TOutOfRange
from talking_clip.core.schedule import DiffusionSchedule, linear_schedule
from talking_clip.core.types import ConditionBundle, LatentClip
from talking_clip.diffusion.noising import TrainingSample, add_noise, recover_z0, training_loss


class ConstantPredictor(ReferenceFreePredictor):
    def __init__(self, value: float) -> None:
        self.value = value

    def predict_noise(
        self,
        z_t: torch.Tensor,
        t: Union[int, torch.Tensor],
        cond: ConditionBundle,
        condition: Any = None,
        cache: Any = None,
    ) -> torch.Tensor:
        return torch.full_like(z_t, self.value)


class OraclePredictor(ReferenceFreePredictor):
    """Knows the clean latents, so it can invert the forward process exactly."""

    def __init__(self, z_0: torch.Tensor, schedule: DiffusionSchedule) -> None:
        self.z_0 = z_0
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
        return (z_t - alpha_bar.sqrt() * self.z_0) / (1.0 - alpha_bar).sqrt()


def random_clip(seed: int, shape: tuple = (4, 4, 8, 8)) -> LatentClip:
    g = torch.Generator().manual_seed(seed)
    return LatentClip(torch.randn(shape, generator=g, dtype=torch.float64))


def test_noise_limits() -> None:
    schedule = linear_schedule(1000)
    z_0, eps = random_clip(0), random_clip(1)
    start = add_noise(z_0, 0, eps, schedule)
    assert torch.allclose(start.data, z_0.data, atol=0.06)
    end = add_noise(z_0, 999, eps, schedule)
    assert torch.allclose(end.data, eps.data, atol=0.05)


@pytest.mark.parametrize("t", [0, 1, 250, 999])
def test_recover_clean_latents(t: int) -> None:
    schedule = linear_schedule(1000)
    z_0, eps = random_clip(2), random_clip(3)
    z_t = add_noise(z_0, t, eps, schedule)
    assert torch.allclose(recover_z0(z_t, t, eps, schedule).data, z_0.data, atol=1e-6)


def test_noised_variance_stays_one() -> None:
    schedule = linear_schedule(1000)
    z_0, eps = random_clip(4, (100, 4, 16, 16)), random_clip(5, (100, 4, 16, 16))
    for t in (10, 500, 900):
        assert abs(add_noise(z_0, t, eps, schedule).data.var().item() - 1.0) < 0.02


def test_timestep_range() -> None:
    schedule = linear_schedule(10)
    with pytest.raises(TOutOfRange):
        add_noise(random_clip(0), 10, random_clip(1), schedule)
    with pytest.raises(TOutOfRange):
        add_noise(random_clip(0), -1, random_clip(1), schedule)
    with pytest.raises(ShapeMismatch):
        add_noise(random_clip(0), 1, random_clip(1, (4, 4, 8, 4)), schedule)


def test_loss_of_zero_predictor_is_noise_power(toy_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    cond = condition_factory(toy_cfg)
    batch = [TrainingSample(z_0=random_clip(i).data.float(), cond=cond, index=i) for i in range(4)]
    loss = training_loss(ConstantPredictor(0.0), batch, linear_schedule(1000), torch.Generator().manual_seed(0))
    assert abs(loss.item() - 1.0) < 0.1


def test_loss_of_oracle_is_zero(toy_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    schedule = linear_schedule(1000)
    z_0 = random_clip(7).data
    batch = [TrainingSample(z_0=z_0, cond=condition_factory(toy_cfg, dtype=torch.float64))]
    loss = training_loss(OraclePredictor(z_0, schedule), batch, schedule, torch.Generator().manual_seed(0))
    assert loss.item() < 1e-12


def test_loss_is_reproducible(toy_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    cond = condition_factory(toy_cfg)
    batch = [TrainingSample(z_0=random_clip(i).data.float(), cond=cond) for i in range(2)]
    schedule = linear_schedule(1000)
    first = training_loss(ConstantPredictor(0.1), batch, schedule, torch.Generator().manual_seed(3))
    second = training_loss(ConstantPredictor(0.1), batch, schedule, torch.Generator().manual_seed(3))
    assert first.item() == second.item()


def test_non_finite_loss(
    toy_cfg: ModelConfig, condition_factory: ConditionFactory, caplog: pytest.LogCaptureFixture
) -> None:
    cond = condition_factory(toy_cfg, drop_ref=True)
    batch = [TrainingSample(z_0=random_clip(0).data.float(), cond=cond, index=12)]
    with caplog.at_level(logging.ERROR, logger="train"), pytest.raises(NonFiniteLoss):
        training_loss(ConstantPredictor(float("nan")), batch, linear_schedule(100), torch.Generator().manual_seed(0))
    assert "sample 12" in caplog.text
    assert "drop_ref=True" in caplog.text

    with pytest.raises(ShapeMismatch):
        training_loss(ConstantPredictor(0.0), [], linear_schedule(100), torch.Generator())
