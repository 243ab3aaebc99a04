import dataclasses
import logging
import math
from pathlib import Path
from typing import Optional, Union

import torch

from talking_clip.audio.extractor import create_extractor, embed_audio
from talking_clip.audio.mel_extractor import DEFAULT_EXTRACTOR
from talking_clip.audio.wav import read_wav
from talking_clip.core.config import ModelConfig, config_hash
from talking_clip.core.errors import CheckpointMismatch, ConfigError
from talking_clip.core.schedule import schedule_for
from talking_clip.diffusion.long_video import LongVideoSource, concat_clips, generate_long_video
from talking_clip.harness.checkpoint import content_hash, load_checkpoint, load_weights
from talking_clip.harness.codec import PatchCodec, load_image
from talking_clip.harness.manifest import RunManifest, clip_boundaries, write_manifest
from talking_clip.model.audio_to_latents import AUDIO_TAG, CONDITION_TAGS, EXPRESSION_TAG, HEAD_MOVE_TAG
from talking_clip.model.talking_model import TalkingClipModel
from talking_clip.utils.debug_timer import time_function

logger = logging.getLogger("infer")


@dataclasses.dataclass(frozen=True)
class InferResult:
    frames_dir: Path
    manifest: Path
    num_frames: int


def output_frame_count(seconds: float, fps: float, clip_len: int) -> int:
    """ceil(seconds * fps) rounded up to a whole number of clips."""
    if seconds <= 0:
        raise ConfigError(f"seconds must be > 0, got {seconds}")
    return clip_len * math.ceil(round(seconds * fps, 9) / clip_len)


def load_stage2_model(cfg: ModelConfig, ckpt_path: Union[str, Path]) -> TalkingClipModel:
    ckpt = load_checkpoint(ckpt_path)
    if ckpt.stage != 2:
        raise CheckpointMismatch(f"inference needs a stage-2 checkpoint, '{ckpt_path}' is stage {ckpt.stage}")
    model = TalkingClipModel(cfg, stage=2)
    load_weights(model, ckpt, cfg)
    model.eval()
    return model


@time_function("inference")
def infer(
    cfg: ModelConfig,
    ckpt_path: Union[str, Path],
    audio_path: Union[str, Path],
    ref_image_path: Union[str, Path],
    seconds: float,
    out_dir: Union[str, Path],
    seed: int = 0,
    drive: str = AUDIO_TAG,
    drive_value: Optional[float] = None,
) -> InferResult:
    """Generate PNG frames driven by a WAV file and a reference image, plus a run manifest."""
    if drive not in CONDITION_TAGS:
        raise ConfigError(f"drive must be one of {CONDITION_TAGS}, got '{drive}'")
    if drive != AUDIO_TAG and drive_value is None:
        raise ConfigError(f"driving by '{drive}' needs a drive value")
    out_dir = Path(out_dir)
    frames_dir = out_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    for stale in frames_dir.glob("frame_*.png"):
        stale.unlink()

    model = load_stage2_model(cfg, ckpt_path)
    codec = PatchCodec.from_config(cfg)
    num_frames = output_frame_count(seconds, cfg.fps, cfg.clip_len)
    n_clips = num_frames // cfg.clip_len

    extractor = create_extractor(DEFAULT_EXTRACTOR, cfg.audio_feature_dim, cfg.seed)
    audio = embed_audio(read_wav(audio_path), cfg.fps, extractor, num_frames=num_frames)
    source = LongVideoSource(
        ref_latent=codec.encode(load_image(str(ref_image_path), cfg.image_size)),
        audio_embed=torch.from_numpy(audio.embed).to(torch.float32),
        head_move_var=float(drive_value) if drive == HEAD_MOVE_TAG else 0.0,
        expr_var=float(drive_value) if drive == EXPRESSION_TAG else 0.0,
        drive=drive,
    )
    clips = generate_long_video(
        n_clips,
        source,
        model,
        schedule_for(cfg),
        cfg.clip_len,
        cfg.motion_frame_len,
        seed=seed,
        steps=cfg.guidance.sample_steps,
        guidance=cfg.guidance,
    )
    for i, latent in enumerate(concat_clips(clips)):
        codec.decode_image(latent).save(frames_dir / f"frame_{i:05d}.png")

    manifest = write_manifest(
        out_dir,
        RunManifest(
            kind="infer",
            seed=seed,
            config_hash=config_hash(cfg),
            checkpoint_hash=content_hash(ckpt_path),
            fps=cfg.fps,
            num_frames=num_frames,
            clip_boundaries=clip_boundaries(n_clips, cfg.clip_len),
            extra={"drive": drive, "drive_value": drive_value, "audio": Path(audio_path).name},
        ),
    )
    logger.info("Wrote %d frames to %s", num_frames, frames_dir)
    return InferResult(frames_dir=frames_dir, manifest=manifest, num_frames=num_frames)
