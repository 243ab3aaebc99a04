# This file contains all shared test fixtures in the project.

import tempfile
from pathlib import Path
from typing import Any, Callable, Iterator

import pytest
import torch

from talking_clip.core.config import PRESETS, ModelConfig
from talking_clip.core.types import AUDIO_WINDOW, ConditionBundle
from talking_clip.harness.dataset import SynthDataset
from talking_clip.harness.synth import synth_dataset
from talking_clip.model.talking_model import TalkingClipModel

NUM_VIDEOS = 2
FRAMES_PER_VIDEO = 40

ConditionFactory = Callable[..., ConditionBundle]

# Small enough for float64 finite-difference checks.
TINY = ModelConfig(
    clip_len=3,
    motion_frame_len=6,
    tsm_stride=1,
    tsm_expand_ratio=2,
    tsm_segments=2,
    plain_motion_frames=2,
    latent_channels=2,
    latent_height=4,
    latent_width=4,
    image_size=8,
    audio_feature_dim=4,
    n_learnable_embeddings=3,
    qkv_dim=4,
    time_embed_dim=8,
    unet_channel_schedule=(4,),
    attention_heads=2,
    norm_groups=2,
    noise_steps=50,
)


@pytest.fixture()
def toy_cfg() -> ModelConfig:
    return PRESETS["toy"]


@pytest.fixture()
def tiny_cfg() -> ModelConfig:
    return TINY


@pytest.fixture()
def condition_factory() -> ConditionFactory:
    """Random conditions for a config: factory(cfg, seed=0, dtype=torch.float32, **bundle_fields)."""

    def make(cfg: ModelConfig, seed: int = 0, dtype: torch.dtype = torch.float32, **fields: Any) -> ConditionBundle:
        g = torch.Generator().manual_seed(seed)
        latent = (cfg.latent_channels, cfg.latent_height, cfg.latent_width)
        values: Any = dict(
            ref_latent=torch.randn(latent, generator=g, dtype=dtype),
            motion_frames=torch.randn((cfg.motion_frame_len,) + latent, generator=g, dtype=dtype),
            audio_embed=torch.randn((cfg.clip_len, AUDIO_WINDOW, cfg.audio_feature_dim), generator=g, dtype=dtype),
            head_move_var=0.5,
            expr_var=0.25,
        )
        values.update(fields)
        return ConditionBundle(**values)

    return make


def randomize_parameters(model: torch.nn.Module, seed: int = 0, std: float = 0.3) -> torch.nn.Module:
    """Overwrite every parameter, zero-initialized projections included, with gaussian values."""
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for param in model.parameters():
            param.copy_(torch.randn(param.shape, generator=g, dtype=param.dtype) * std)
    return model


class ReferenceFreePredictor:
    """Base of hand-written noise predictors without a reference network."""

    def reference_features(self, cond: ConditionBundle, rng: Any = None) -> None:
        return None


@pytest.fixture()
def tiny_model(tiny_cfg: ModelConfig) -> TalkingClipModel:
    torch.manual_seed(0)
    return TalkingClipModel(tiny_cfg, stage=2).double()


@pytest.fixture()
def random_tiny_model(tiny_model: TalkingClipModel) -> TalkingClipModel:
    randomize_parameters(tiny_model, seed=1)
    return tiny_model


@pytest.fixture(scope="session")
def dataset_dir() -> Iterator[Path]:
    with tempfile.TemporaryDirectory() as temp_dir:
        root = Path(temp_dir)
        synth_dataset(root, NUM_VIDEOS, FRAMES_PER_VIDEO, seed=0, image_size=PRESETS["toy"].image_size)
        yield root


@pytest.fixture(scope="session")
def toy_dataset(dataset_dir: Path) -> SynthDataset:
    return SynthDataset(dataset_dir, PRESETS["toy"])
