import pytest
import torch

from talking_clip.core.config import PRESETS
from talking_clip.core.errors import ConfigError, TOutOfRange
from talking_clip.core.schedule import linear_schedule, schedule_for


def test_linear_schedule() -> None:
    schedule = linear_schedule(1000, 1e-4, 2e-2)
    assert schedule.num_steps == 1000
    assert schedule.betas.dtype == torch.float64
    assert schedule.betas[0].item() == pytest.approx(1e-4)
    assert schedule.betas[-1].item() == pytest.approx(2e-2)
    assert bool((schedule.alpha_cumprod[1:] < schedule.alpha_cumprod[:-1]).all())
    assert schedule.alpha_cumprod[0].item() == pytest.approx(1.0 - 1e-4)


def test_check_t() -> None:
    schedule = schedule_for(PRESETS["toy"])
    assert schedule.check_t(999) == 999
    with pytest.raises(TOutOfRange):
        schedule.check_t(1000)
    with pytest.raises(TOutOfRange):
        schedule.check_t(-1)


def test_invalid_schedule() -> None:
    with pytest.raises(ConfigError):
        linear_schedule(0)
    with pytest.raises(ConfigError):
        linear_schedule(10, 0.5, 0.1)
