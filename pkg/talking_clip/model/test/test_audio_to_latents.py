import numpy as np
import pytest
import torch

from talking_clip.conftest import ConditionFactory, randomize_parameters
from talking_clip.core.config import ModelConfig
from talking_clip.core.errors import ShapeMismatch, UnknownConditionTag
from talking_clip.model.audio_to_latents import (
    AUDIO_TAG,
    CONDITION_TAGS,
    EXPRESSION_TAG,
    HEAD_MOVE_TAG,
    MotionLatentBank,
    TaggedCondition,
    build_bank,
    condition_from_bundle,
    sample_training_condition,
    to_motion_latent,
)


def test_untrained_bank_is_zero(toy_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    torch.manual_seed(0)
    bank = build_bank(toy_cfg)
    cond = condition_factory(toy_cfg)
    for tag in CONDITION_TAGS:
        latent = to_motion_latent(condition_from_bundle(cond, tag), bank)
        assert latent.shape == (toy_cfg.time_embed_dim,)
        assert latent.abs().max().item() == 0.0


def test_unknown_tag(toy_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    bank = build_bank(toy_cfg)
    with pytest.raises(UnknownConditionTag):
        condition_from_bundle(condition_factory(toy_cfg), "pose")
    with pytest.raises(UnknownConditionTag):
        bank(TaggedCondition("pose", torch.zeros(())))


def test_audio_width_checked(toy_cfg: ModelConfig) -> None:
    bank = build_bank(toy_cfg)
    with pytest.raises(ShapeMismatch):
        bank(TaggedCondition(AUDIO_TAG, torch.zeros(4, 5, toy_cfg.audio_feature_dim + 1)))


def test_training_tags_are_uniform(toy_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    cond = condition_factory(toy_cfg)
    rng = np.random.default_rng(0)
    counts = {tag: 0 for tag in CONDITION_TAGS}
    n = 30000
    for _ in range(n):
        counts[sample_training_condition(cond, rng).tag] += 1
    for tag in CONDITION_TAGS:
        assert abs(counts[tag] / n - 1 / 3) < 0.01

    assert sample_training_condition(cond, rng, training=False).tag == AUDIO_TAG


def test_variance_conditions_carry_values(toy_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    cond = condition_factory(toy_cfg, head_move_var=2.0, expr_var=0.125)
    assert condition_from_bundle(cond, HEAD_MOVE_TAG).value.item() == 2.0
    assert condition_from_bundle(cond, EXPRESSION_TAG).value.item() == 0.125


def test_gradients_reach_embeddings(toy_cfg: ModelConfig, condition_factory: ConditionFactory) -> None:
    torch.manual_seed(0)
    bank = build_bank(toy_cfg)
    with torch.no_grad():
        bank.to_out.weight.normal_(std=0.1)
    cond = condition_factory(toy_cfg)
    bank(condition_from_bundle(cond, AUDIO_TAG)).square().sum().backward()
    assert bank.learnable_embeddings.grad is not None
    assert bank.learnable_embeddings.grad.abs().sum().item() > 0


@pytest.mark.parametrize("pooling", ["mean", "attention"])
def test_latent_depends_on_condition_value(pooling: str) -> None:
    bank = MotionLatentBank(audio_dim=6, n_embeddings=8, qkv_dim=8, out_dim=12, pooling=pooling)
    randomize_parameters(bank, seed=3)
    quiet = bank(TaggedCondition(HEAD_MOVE_TAG, torch.tensor(0.0)))
    lively = bank(TaggedCondition(HEAD_MOVE_TAG, torch.tensor(4.0)))
    assert not torch.allclose(quiet, lively)

    g = torch.Generator().manual_seed(0)
    a = bank(TaggedCondition(AUDIO_TAG, torch.randn(3, 5, 6, generator=g)))
    b = bank(TaggedCondition(AUDIO_TAG, torch.randn(3, 5, 6, generator=g)))
    assert a.shape == (12,)
    assert not torch.allclose(a, b)
