"""Two-stage training driver.

Stage 1 trains the reference network and a denoiser without temporal or audio layers on single
frames. Stage 2 starts from the stage-1 weights, adds the temporal layers, the audio cross-attention
and the audio-to-latents bank (all with zero output projections) and trains on whole clips with
condition dropout.
"""

import dataclasses
import logging
import sys
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import torch
from tqdm import tqdm

from talking_clip.conditioning.dropout import apply_dropout, log_rates, sample_streams
from talking_clip.core.config import DropoutRates, ModelConfig, config_hash
from talking_clip.core.errors import CheckpointMismatch, ConfigError
from talking_clip.core.schedule import schedule_for
from talking_clip.diffusion.noising import TrainingSample, training_loss
from talking_clip.harness.checkpoint import content_hash, load_checkpoint, load_weights, save_checkpoint
from talking_clip.harness.dataset import SynthDataset
from talking_clip.harness.manifest import RunManifest, write_manifest
from talking_clip.model.audio_to_latents import sample_training_condition
from talking_clip.model.talking_model import TalkingClipModel
from talking_clip.utils.debug_timer import time_function

logger = logging.getLogger("train")


@dataclasses.dataclass(frozen=True)
class TrainResult:
    checkpoint: Path
    losses: List[float]
    step: int


def stage_dropout_rates(cfg: ModelConfig, stage: int) -> DropoutRates:
    """Stage 1 has no audio or motion-frame path, only the reference can be dropped."""
    if stage == 1:
        return DropoutRates(audio=0.0, motion_latents=0.0, ref_drop=cfg.dropout.ref_drop, mf_mask=0.0)
    return cfg.dropout


def build_model(cfg: ModelConfig, stage: int) -> TalkingClipModel:
    torch.manual_seed(cfg.seed)
    model = TalkingClipModel(cfg, stage=stage)
    logger.debug("Stage-%d parameter groups: %s", stage, model.parameter_groups())
    return model


def _make_batch(
    dataset: SynthDataset, cfg: ModelConfig, stage: int, step: int, rates: DropoutRates
) -> List[TrainingSample]:
    batch = []
    for b in range(cfg.train.batch_size):
        index = step * cfg.train.batch_size + b
        streams = sample_streams(cfg.seed, index)
        clip = dataset.sample_clip(streams.data, clip_len=1 if stage == 1 else cfg.clip_len)
        cond = apply_dropout(clip.cond, streams.dropout, rates)
        condition = sample_training_condition(cond, streams.condition) if stage == 2 else None
        batch.append(
            TrainingSample(z_0=clip.z_0, cond=cond, condition=condition, index=index, schedule_rng=streams.schedule)
        )
    return batch


def _train_loop(
    model: TalkingClipModel,
    cfg: ModelConfig,
    dataset: SynthDataset,
    out_dir: Path,
    steps: int,
    start_step: int,
    progress: bool,
) -> TrainResult:
    if steps < 0:
        raise ConfigError(f"training steps must be >= 0, got {steps}")
    stage = model.stage
    rates = stage_dropout_rates(cfg, stage)
    log_rates(rates)
    schedule = schedule_for(cfg)
    optimizer = torch.optim.AdamW(model.parameters(), lr=cfg.train.lr, weight_decay=cfg.train.weight_decay)
    generator = torch.Generator().manual_seed(cfg.seed * 1_000_003 + start_step)
    ckpt_path = out_dir / f"stage{stage}.safetensors"

    model.train()
    losses: List[float] = []
    bar = tqdm(range(start_step, start_step + steps), desc=f"stage {stage}", disable=not progress, file=sys.stderr)
    for step in bar:
        batch = _make_batch(dataset, cfg, stage, step, rates)
        loss = training_loss(model, batch, schedule, generator)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        losses.append(float(loss.item()))
        bar.set_postfix(loss=f"{losses[-1]:.4f}")
        if (step + 1) % cfg.train.log_every == 0:
            window = losses[-cfg.train.log_every :]
            logger.info("stage %d step %d: loss %.5f", stage, step + 1, sum(window) / len(window))
        if (step + 1) % cfg.train.checkpoint_every == 0:
            save_checkpoint(ckpt_path, model, stage, step + 1, cfg)

    end_step = start_step + steps
    save_checkpoint(ckpt_path, model, stage, end_step, cfg)
    write_manifest(
        out_dir,
        RunManifest(
            kind="train",
            seed=cfg.seed,
            config_hash=config_hash(cfg),
            checkpoint_hash=content_hash(ckpt_path),
            extra={"stage": stage, "step": end_step, "dropout": dataclasses.asdict(rates)},
        ),
    )
    return TrainResult(checkpoint=ckpt_path, losses=losses, step=end_step)


def _resume(model: TalkingClipModel, cfg: ModelConfig, resume: Optional[Union[str, Path]]) -> int:
    if resume is None:
        return 0
    ckpt = load_checkpoint(resume)
    if ckpt.stage != model.stage:
        raise CheckpointMismatch(f"cannot resume stage {model.stage} from a stage-{ckpt.stage} checkpoint")
    load_weights(model, ckpt, cfg)
    logger.info("Resuming stage %d at step %d", model.stage, ckpt.step)
    return ckpt.step


@time_function("stage 1 training")
def train_stage1(
    cfg: ModelConfig,
    dataset: SynthDataset,
    out_dir: Union[str, Path],
    steps: Optional[int] = None,
    resume: Optional[Union[str, Path]] = None,
    progress: bool = False,
) -> TrainResult:
    """Single-frame targets with reference conditioning only."""
    model = build_model(cfg, stage=1)
    start = _resume(model, cfg, resume)
    n_steps = cfg.train.steps if steps is None else steps
    return _train_loop(model, cfg, dataset, Path(out_dir), n_steps, start, progress)


def init_stage2(cfg: ModelConfig, stage1_ckpt: Union[str, Path]) -> TalkingClipModel:
    """Full model initialised from stage-1 weights; the added layers keep their zero-init outputs."""
    ckpt = load_checkpoint(stage1_ckpt)
    if ckpt.stage != 1:
        raise CheckpointMismatch(f"'{stage1_ckpt}' is a stage-{ckpt.stage} checkpoint, expected stage 1")
    model = build_model(cfg, stage=2)
    load_weights(model, ckpt, cfg, allow_stage2_missing=True)
    return model


@time_function("stage 2 training")
def train_stage2(
    cfg: ModelConfig,
    dataset: SynthDataset,
    stage1_ckpt: Optional[Union[str, Path]],
    out_dir: Union[str, Path],
    steps: Optional[int] = None,
    resume: Optional[Union[str, Path]] = None,
    progress: bool = False,
) -> TrainResult:
    """Clip targets with every condition and condition dropout. Needs a stage-1 checkpoint unless resuming."""
    if resume is not None:
        model = build_model(cfg, stage=2)
        start = _resume(model, cfg, resume)
    elif stage1_ckpt is not None:
        model, start = init_stage2(cfg, stage1_ckpt), 0
    else:
        raise CheckpointMismatch("stage 2 needs a stage-1 checkpoint or a stage-2 checkpoint to resume")
    n_steps = cfg.train.steps if steps is None else steps
    return _train_loop(model, cfg, dataset, Path(out_dir), n_steps, start, progress)


def loss_drop(losses: List[float], head: int = 10) -> float:
    """Relative drop of the last `head` steps' mean loss from the first `head` steps' mean."""
    first = float(np.mean(losses[:head]))
    last = float(np.mean(losses[-head:]))
    return (first - last) / first
