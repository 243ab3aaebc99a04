import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from talking_clip.core.config import ModelConfig, load_config, validate_config
from talking_clip.core.errors import TalkingClipError
from talking_clip.harness.dataset import SynthDataset
from talking_clip.harness.infer import infer
from talking_clip.harness.synth import synth_dataset
from talking_clip.harness.train import train_stage1, train_stage2
from talking_clip.model.audio_to_latents import AUDIO_TAG, CONDITION_TAGS
from talking_clip.motion.keypoints import read_keypoints
from talking_clip.motion.metrics import motion_metrics
from talking_clip.temporal_segment.segment import build_schedule, format_schedule_table
from talking_clip.utils.version_summary import create_version_summary

logger = logging.getLogger("cli")

PACKAGE_LOGGERS = ("cli", "config", "data", "model", "train", "sample", "infer", "metrics", "perf")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="talking-clip", description="Audio-driven talking-clip diffusion toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="turn on verbose logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="no progress bars, warnings only")
    parser.add_argument("--version", action="store_true", help="print version summary and exit")
    parser.add_argument("--config", default=None, help="preset name (toy, full) or JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default="out", help="output directory")
    sub = parser.add_subparsers(dest="command")

    synth = sub.add_parser("synth-data", help="write a synthetic talking-portrait dataset")
    synth.add_argument("--videos", type=int, default=4)
    synth.add_argument("--frames", type=int, default=64, help="frames per video")

    train = sub.add_parser("train", help="train stage 1 or stage 2")
    train.add_argument("--stage", type=int, choices=(1, 2), required=True)
    train.add_argument("--data", required=True, help="synthetic dataset directory")
    train.add_argument("--stage1-ckpt", default=None, help="stage-1 checkpoint to start stage 2 from")
    train.add_argument("--resume", default=None, help="checkpoint of the same stage to continue")
    train.add_argument("--steps", type=int, default=None, help="override train.steps")

    infer = sub.add_parser("infer", help="generate frames from audio and a reference image")
    infer.add_argument("--ckpt", required=True, help="stage-2 checkpoint")
    infer.add_argument("--audio", required=True, help="mono 16-bit PCM WAV file")
    infer.add_argument("--ref-image", required=True)
    infer.add_argument("--seconds", type=float, required=True)
    infer.add_argument("--drive", choices=CONDITION_TAGS, default=AUDIO_TAG, help="condition driving the motion latent")
    infer.add_argument("--drive-value", type=float, default=None, help="variance used with a non-audio drive")

    metrics = sub.add_parser("metrics", help="Glo/Exp motion metrics of keypoint files")
    metrics.add_argument("--gen", required=True, help="generated keypoints (JSON lines)")
    metrics.add_argument("--gt", default=None, help="ground-truth keypoints (JSON lines)")
    metrics.add_argument("--window", type=int, default=None, help="frames per window, default from config")
    metrics.add_argument("--whole", action="store_true", help="compute over the whole sequence")

    tsm = sub.add_parser("tsm-schedule", help="print the motion-frame slot table")
    tsm.add_argument("--stride", type=int, default=None)
    tsm.add_argument("--expand-ratio", type=int, default=None)
    tsm.add_argument("--segments", type=int, default=None)
    tsm.add_argument("--strategy", default=None)
    return parser


def _config(args: argparse.Namespace) -> ModelConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = validate_config(dataclasses.replace(cfg, seed=args.seed))
    return cfg


def _print_json(data: Dict[str, Any]) -> None:
    print(json.dumps(data, sort_keys=True))


def _synth_data(args: argparse.Namespace, cfg: ModelConfig) -> None:
    manifest = synth_dataset(args.out, args.videos, args.frames, cfg.seed, cfg.image_size, cfg.fps)
    _print_json({"dataset": str(args.out), "videos": len(manifest.videos)})


def _train(args: argparse.Namespace, cfg: ModelConfig) -> None:
    dataset = SynthDataset(args.data, cfg)
    progress = not args.quiet and sys.stderr.isatty()
    if args.stage == 1:
        result = train_stage1(cfg, dataset, args.out, args.steps, args.resume, progress)
    else:
        result = train_stage2(cfg, dataset, args.stage1_ckpt, args.out, args.steps, args.resume, progress)
    final_loss = result.losses[-1] if result.losses else None
    _print_json({"checkpoint": str(result.checkpoint), "step": result.step, "final_loss": final_loss})


def _infer(args: argparse.Namespace, cfg: ModelConfig) -> None:
    result = infer(
        cfg, args.ckpt, args.audio, args.ref_image, args.seconds, args.out, cfg.seed, args.drive, args.drive_value
    )
    _print_json({"frames": str(result.frames_dir), "manifest": str(result.manifest), "num_frames": result.num_frames})


def _metrics(args: argparse.Namespace, cfg: ModelConfig) -> None:
    gen = read_keypoints(args.gen)
    gt = read_keypoints(args.gt) if args.gt is not None else None
    window: Optional[int] = None if args.whole else (args.window or cfg.metrics.window)
    report = motion_metrics(gen, gt, window, cfg.metrics)
    _print_json(report.to_dict())


def _tsm_schedule(args: argparse.Namespace, cfg: ModelConfig) -> None:
    schedule = build_schedule(
        args.stride if args.stride is not None else cfg.tsm_stride,
        args.expand_ratio if args.expand_ratio is not None else cfg.tsm_expand_ratio,
        args.segments if args.segments is not None else cfg.tsm_segments,
        args.strategy or cfg.tsm_strategy,
        rng=np.random.default_rng(cfg.seed),
    )
    print("slot segment raw")
    for line in format_schedule_table(schedule):
        print(line)


_COMMANDS = {
    "synth-data": _synth_data,
    "train": _train,
    "infer": _infer,
    "metrics": _metrics,
    "tsm-schedule": _tsm_schedule,
}


def run(argv: List[str]) -> int:
    args = _parser().parse_args(argv[1:])

    if args.version:
        print(create_version_summary())
        return 0

    logging.basicConfig(
        level=logging.WARNING,
        format="%(asctime)s [%(name)s] %(message)s",
        datefmt="%H:%M:%S",
    )
    level = logging.DEBUG if args.verbose else (logging.WARNING if args.quiet else logging.INFO)
    for name in PACKAGE_LOGGERS:
        logging.getLogger(name).setLevel(level)

    if args.command is None:
        _parser().print_usage(sys.stderr)
        return 2

    try:
        cfg = _config(args)
        if args.command in ("synth-data", "train", "infer"):
            Path(args.out).mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](args, cfg)
    except TalkingClipError as e:
        logger.debug("Command '%s' failed", args.command, exc_info=True)
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1
    return 0


def main() -> int:
    return run(sys.argv)
