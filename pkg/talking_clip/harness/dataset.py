import dataclasses
import json
import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import torch
from PIL import Image

from talking_clip.audio.extractor import AudioExtractor, create_extractor, embed_audio
from talking_clip.audio.mel_extractor import DEFAULT_EXTRACTOR
from talking_clip.audio.wav import read_wav
from talking_clip.core.config import ModelConfig
from talking_clip.core.errors import DatasetError, TooFewFrames
from talking_clip.core.types import ConditionBundle
from talking_clip.harness.codec import PatchCodec
from talking_clip.harness.synth import MANIFEST_NAME
from talking_clip.motion.keypoints import KeypointSequence, read_keypoints
from talking_clip.motion.metrics import expression_variance, head_movement_variance
from talking_clip.utils.debug_timer import time_function

logger = logging.getLogger("data")


@dataclasses.dataclass(frozen=True)
class EncodedVideo:
    name: str
    latents: torch.Tensor  # [N, C, h, w]
    audio_embed: torch.Tensor  # [N, 5, A]
    keypoints: KeypointSequence

    @property
    def num_frames(self) -> int:
        return int(self.latents.shape[0])


@dataclasses.dataclass(frozen=True)
class ClipSample:
    z_0: torch.Tensor  # [F, C, h, w]
    cond: ConditionBundle
    video: str
    start: int


class SynthDataset:
    """Synthetic videos encoded to latents, with per-frame audio embeddings and keypoints."""

    def __init__(self, root: Union[str, Path], cfg: ModelConfig, extractor: Optional[AudioExtractor] = None) -> None:
        self.root = Path(root)
        self.cfg = cfg
        self.codec = PatchCodec.from_config(cfg)
        self.extractor = extractor or create_extractor(DEFAULT_EXTRACTOR, cfg.audio_feature_dim, cfg.seed)
        self.videos: List[EncodedVideo] = self._load()

    @time_function("dataset loading")
    def _load(self) -> List[EncodedVideo]:
        manifest_path = self.root / MANIFEST_NAME
        if not manifest_path.is_file():
            raise DatasetError(f"no {MANIFEST_NAME} in '{self.root}'")
        manifest = json.loads(manifest_path.read_text("utf-8"))
        if manifest.get("image_size") != self.cfg.image_size:
            raise DatasetError(f"dataset image size {manifest.get('image_size')} != config {self.cfg.image_size}")
        videos = [self._load_video(entry) for entry in manifest.get("videos", [])]
        logger.info("Loaded %d videos from %s", len(videos), self.root)
        return videos

    def _load_video(self, entry: dict) -> EncodedVideo:
        frame_paths = sorted((self.root / entry["frames"]).glob("frame_*.png"))
        if len(frame_paths) != entry["num_frames"]:
            raise DatasetError(f"{entry['name']}: expected {entry['num_frames']} frames, found {len(frame_paths)}")
        images = np.stack([np.asarray(Image.open(p).convert("RGB"), dtype=np.uint8) for p in frame_paths])
        kps = read_keypoints(self.root / entry["keypoints"])
        if kps.num_frames != len(frame_paths):
            raise DatasetError(f"{entry['name']}: {kps.num_frames} keypoint frames for {len(frame_paths)} images")
        track = read_wav(self.root / entry["audio"])
        audio = embed_audio(track, self.cfg.fps, self.extractor, num_frames=len(frame_paths))
        return EncodedVideo(
            name=entry["name"],
            latents=self.codec.encode_frames(images),
            audio_embed=torch.from_numpy(audio.embed.astype(np.float32)),
            keypoints=kps,
        )

    def __len__(self) -> int:
        return len(self.videos)

    def sample_clip(self, rng: np.random.Generator, clip_len: Optional[int] = None) -> ClipSample:
        """A random training clip with its preceding motion frames and a random same-video reference."""
        num_frames = self.cfg.clip_len if clip_len is None else clip_len
        candidates = [v for v in self.videos if v.num_frames >= num_frames]
        if len(candidates) == 0:
            raise DatasetError(f"no video has the {num_frames} frames a clip needs")
        video = candidates[int(rng.integers(0, len(candidates)))]
        start = int(rng.integers(0, video.num_frames - num_frames + 1))
        ref_index = int(rng.integers(0, video.num_frames))
        return self.clip_at(video, start, ref_index, num_frames)

    def clip_at(self, video: EncodedVideo, start: int, ref_index: int, num_frames: int) -> ClipSample:
        raw = start - 1 - np.arange(self.cfg.motion_frame_len)  # closest first
        validity = torch.from_numpy(raw >= 0)
        motion = video.latents[torch.from_numpy(np.clip(raw, 0, None))]
        window = video.keypoints.window(start, start + num_frames)
        try:
            head_move, expr = head_movement_variance(window), expression_variance(window)
        except TooFewFrames:
            head_move, expr = 0.0, 0.0
        cond = ConditionBundle(
            ref_latent=video.latents[ref_index],
            motion_frames=motion,
            audio_embed=video.audio_embed[start : start + num_frames],
            head_move_var=head_move,
            expr_var=expr,
            motion_frame_validity=validity,
        )
        return ClipSample(z_0=video.latents[start : start + num_frames], cond=cond, video=video.name, start=start)
