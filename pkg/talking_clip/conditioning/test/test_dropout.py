import logging

import numpy as np
import pytest

from talking_clip.conditioning.dropout import apply_dropout, draw_dropout, dropout_rng, log_rates
from talking_clip.conftest import ConditionFactory
from talking_clip.core.config import DropoutRates, ModelConfig


def test_zero_rates_keep_bundle(toy_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    cond = condition_factory(toy_cfg)
    rng = np.random.default_rng(0)
    rates = DropoutRates(0.0, 0.0, 0.0, 0.0)
    for _ in range(100):
        assert apply_dropout(cond, rng, rates) is cond


def test_certain_rates_set_every_flag(toy_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    cond = apply_dropout(condition_factory(toy_cfg), np.random.default_rng(0), DropoutRates(1.0, 1.0, 1.0, 1.0))
    assert cond.mask_audio and cond.mask_motion_latents and cond.drop_ref and cond.mask_motion_frames


def test_existing_flags_survive(toy_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    cond = condition_factory(toy_cfg, drop_ref=True)
    out = apply_dropout(cond, np.random.default_rng(0), DropoutRates(1.0, 0.0, 0.0, 0.0))
    assert out.drop_ref and out.mask_audio


def test_empirical_rates() -> None:
    rates = DropoutRates()
    rng = np.random.default_rng(1234)
    n = 100_000
    totals = np.zeros(4)
    for _ in range(n):
        draw = draw_dropout(rng, rates)
        totals += [draw.mask_audio, draw.mask_motion_latents, draw.drop_ref, draw.mask_motion_frames]
    expected = np.array([rates.audio, rates.motion_latents, rates.ref_drop, rates.mf_mask])
    assert np.all(np.abs(totals / n - expected) < 0.005)


@pytest.mark.parametrize("index", [0, 1, 999])
def test_sample_streams_are_reproducible(index: int) -> None:
    rates = DropoutRates(0.5, 0.5, 0.5, 0.5)
    first = [draw_dropout(dropout_rng(7, index), rates) for _ in range(3)]
    assert first[0] == first[1] == first[2]
    assert dropout_rng(7, index).random() != dropout_rng(7, index + 1).random()
    assert dropout_rng(7, index).random() != dropout_rng(8, index).random()


def test_log_rates(caplog: pytest.LogCaptureFixture) -> None:
    with caplog.at_level(logging.INFO, logger="train"):
        log_rates(DropoutRates())
    assert "reference drop 0.15" in caplog.text
