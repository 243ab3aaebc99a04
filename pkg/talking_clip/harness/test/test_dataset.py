import json
import shutil
from pathlib import Path

import numpy as np
import pytest
import torch

from talking_clip.core.config import PRESETS, ModelConfig
from talking_clip.core.errors import DatasetError
from talking_clip.harness.dataset import SynthDataset
from talking_clip.harness.synth import MANIFEST_NAME


def test_loaded_shapes(toy_dataset: SynthDataset, toy_cfg: ModelConfig) -> None:
    assert len(toy_dataset) == 2
    video = toy_dataset.videos[0]
    assert video.latents.shape == (40, 4, 8, 8)
    assert video.audio_embed.shape == (40, 5, toy_cfg.audio_feature_dim)
    assert video.keypoints.num_frames == 40


def test_sampled_clip(toy_dataset: SynthDataset, toy_cfg: ModelConfig) -> None:
    rng = np.random.default_rng(0)
    for _ in range(20):
        clip = toy_dataset.sample_clip(rng)
        assert clip.z_0.shape == (toy_cfg.clip_len, 4, 8, 8)
        clip.cond.check_against(toy_cfg)
        assert clip.cond.num_frames == toy_cfg.clip_len
        assert clip.cond.head_move_var >= 0 and clip.cond.expr_var >= 0
        assert int(clip.cond.validity.sum()) == min(clip.start, toy_cfg.motion_frame_len)

    single = toy_dataset.sample_clip(rng, clip_len=1)
    assert single.z_0.shape[0] == 1
    assert single.cond.head_move_var == 0.0


def test_motion_frames_are_closest_first(toy_dataset: SynthDataset, toy_cfg: ModelConfig) -> None:
    video = toy_dataset.videos[1]
    clip = toy_dataset.clip_at(video, start=5, ref_index=0, num_frames=toy_cfg.clip_len)
    assert clip.cond.validity.tolist() == [True] * 5 + [False] * (toy_cfg.motion_frame_len - 5)
    for slot in range(5):
        assert torch.equal(clip.cond.motion_frames[slot], video.latents[4 - slot])
    assert clip.cond.motion_frames[5:].abs().max().item() == 0.0
    assert torch.equal(clip.cond.ref_latent, video.latents[0])
    assert torch.equal(clip.cond.audio_embed, video.audio_embed[5 : 5 + toy_cfg.clip_len])


def test_dataset_errors(tmp_path: Path, dataset_dir: Path) -> None:
    with pytest.raises(DatasetError):
        SynthDataset(tmp_path, PRESETS["toy"])

    copy = tmp_path / "copy"
    shutil.copytree(dataset_dir, copy)
    with pytest.raises(DatasetError):
        SynthDataset(copy, PRESETS["full"])

    manifest = json.loads((copy / MANIFEST_NAME).read_text("utf-8"))
    (copy / manifest["videos"][0]["frames"] / "frame_00003.png").unlink()
    with pytest.raises(DatasetError):
        SynthDataset(copy, PRESETS["toy"])


def test_clip_longer_than_videos(toy_dataset: SynthDataset) -> None:
    with pytest.raises(DatasetError):
        toy_dataset.sample_clip(np.random.default_rng(0), clip_len=41)
