"""Checkpoints are safetensors files whose metadata holds the format version, training stage, step and
canonical config JSON. Writes are atomic."""

import dataclasses
import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Union

import torch
from safetensors import SafetensorError, safe_open
from safetensors.torch import save_file
from torch import nn

from talking_clip.core.config import ModelConfig, config_from_dict, config_to_dict, dump_config
from talking_clip.core.errors import CheckpointMismatch, ConfigError
from talking_clip.model.denoiser import AUDIO_GROUPS, TEMPORAL_GROUPS

logger = logging.getLogger("train")

FORMAT_VERSION = "1"

# Settings that may differ between the run that wrote a checkpoint and the run that loads it.
_NON_ARCHITECTURAL = ("seed", "dropout", "guidance", "train", "metrics")


@dataclasses.dataclass(frozen=True)
class Checkpoint:
    state: Dict[str, torch.Tensor]
    stage: int
    step: int
    config: ModelConfig


def save_checkpoint(path: Union[str, Path], model: nn.Module, stage: int, step: int, cfg: ModelConfig) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state = {name: tensor.detach().contiguous() for name, tensor in model.state_dict().items()}
    metadata = {"format_version": FORMAT_VERSION, "stage": str(stage), "step": str(step), "config": dump_config(cfg)}
    tmp = path.with_name(path.name + ".tmp")
    save_file(state, str(tmp), metadata=metadata)
    os.replace(tmp, path)
    logger.info("Saved stage-%d checkpoint at step %d to %s", stage, step, path)
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointMismatch(f"checkpoint '{path}' does not exist")
    try:
        with safe_open(str(path), framework="pt") as f:
            metadata = f.metadata() or {}
            state = {name: f.get_tensor(name) for name in f.keys()}
    except (SafetensorError, OSError) as e:
        raise CheckpointMismatch(f"cannot read checkpoint '{path}': {e}") from e
    if metadata.get("format_version") != FORMAT_VERSION:
        raise CheckpointMismatch(f"'{path}' has format version {metadata.get('format_version')}, expected 1")
    try:
        cfg = config_from_dict(json.loads(metadata["config"]))
        stage, step = int(metadata["stage"]), int(metadata["step"])
    except (KeyError, ValueError, ConfigError) as e:
        raise CheckpointMismatch(f"'{path}' has invalid metadata: {e}") from e
    return Checkpoint(state=state, stage=stage, step=step, config=cfg)


def _architecture(cfg: ModelConfig) -> Dict[str, Any]:
    data = config_to_dict(cfg)
    for key in _NON_ARCHITECTURAL:
        data.pop(key)
    return data


def check_config_matches(ckpt: Checkpoint, cfg: ModelConfig) -> None:
    ours, theirs = _architecture(cfg), _architecture(ckpt.config)
    differing = sorted(k for k in ours if ours[k] != theirs.get(k))
    if len(differing) > 0:
        raise CheckpointMismatch(f"checkpoint config differs in: {', '.join(differing)}")


def is_stage2_only(name: str) -> bool:
    return any(group in name for group in TEMPORAL_GROUPS + AUDIO_GROUPS)


def load_weights(model: nn.Module, ckpt: Checkpoint, cfg: ModelConfig, allow_stage2_missing: bool = False) -> None:
    """Load `ckpt` into `model`.

    With `allow_stage2_missing`, parameters of the temporal and audio groups may be absent from the
    checkpoint (a stage-1 checkpoint loaded into a stage-2 model); anything else must match exactly.
    """
    check_config_matches(ckpt, cfg)
    try:
        result = model.load_state_dict(ckpt.state, strict=False)
    except RuntimeError as e:
        raise CheckpointMismatch(f"checkpoint tensors do not fit the model: {e}") from e
    missing = [k for k in result.missing_keys if not (allow_stage2_missing and is_stage2_only(k))]
    if len(missing) > 0 or len(result.unexpected_keys) > 0:
        raise CheckpointMismatch(
            f"checkpoint mismatch: missing {sorted(missing)[:5]}, unexpected {sorted(result.unexpected_keys)[:5]}"
        )
    logger.debug("Loaded %d tensors (%d left at init)", len(ckpt.state), len(result.missing_keys))


def content_hash(path: Union[str, Path]) -> str:
    """Git blob hash of a file."""
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()
