"""Procedural talking-portrait dataset.

Every video is a coloured disk "face" with eyes and a mouth. A hidden speech envelope drives both the
audio loudness and the mouth aperture, an independent sinusoid moves the head and another one moves
the brows (upper-face keypoints relative to the nose).
"""

import dataclasses
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np
from PIL import Image, ImageDraw

from talking_clip.audio.track import AudioTrack
from talking_clip.audio.wav import write_wav
from talking_clip.core.errors import DatasetError
from talking_clip.motion.keypoints import KeypointSequence, write_keypoints
from talking_clip.utils.debug_timer import time_function

logger = logging.getLogger("data")

MANIFEST_NAME = "dataset.json"
MANIFEST_VERSION = 1

NOSE_INDEX = 0
UPPER_FACE_INDICES = np.arange(1, 38)
MOUTH_INDICES = np.arange(38, 46)
NUM_POINTS = 46

CARRIER_HZ = 200.0


@dataclasses.dataclass(frozen=True)
class VideoEntry:
    name: str
    num_frames: int
    frames: str
    audio: str
    keypoints: str
    envelope_mouth_correlation: float


@dataclasses.dataclass(frozen=True)
class DatasetManifest:
    seed: int
    fps: float
    sample_rate: int
    image_size: int
    videos: List[VideoEntry]

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data["format_version"] = MANIFEST_VERSION
        return data


@dataclasses.dataclass(frozen=True)
class _Motion:
    """Hidden signals of one video, as functions of time in seconds."""

    speech_hz: float
    speech_phase: float
    head_hz: Tuple[float, float]
    head_phase: float
    brow_hz: float
    brow_phase: float

    def envelope(self, t: np.ndarray) -> np.ndarray:
        return 0.5 + 0.45 * np.sin(2.0 * np.pi * self.speech_hz * t + self.speech_phase)

    def head(self, t: np.ndarray) -> np.ndarray:
        x = np.sin(2.0 * np.pi * self.head_hz[0] * t + self.head_phase)
        y = 0.5 * np.sin(2.0 * np.pi * self.head_hz[1] * t)
        return np.stack([x, y], axis=-1)

    def brow(self, t: np.ndarray) -> np.ndarray:
        return np.sin(2.0 * np.pi * self.brow_hz * t + self.brow_phase)


def _random_motion(rng: np.random.Generator) -> _Motion:
    return _Motion(
        speech_hz=float(rng.uniform(1.5, 4.0)),
        speech_phase=float(rng.uniform(0.0, 2.0 * np.pi)),
        head_hz=(float(rng.uniform(0.2, 0.8)), float(rng.uniform(0.2, 0.8))),
        head_phase=float(rng.uniform(0.0, 2.0 * np.pi)),
        brow_hz=float(rng.uniform(0.5, 2.0)),
        brow_phase=float(rng.uniform(0.0, 2.0 * np.pi)),
    )


def face_keypoints(size: int, nose: np.ndarray, aperture: float, brow: float) -> np.ndarray:
    """[46, 2] keypoints: nose, 37 upper-face points on an arc, 8 mouth points on an ellipse."""
    points = np.zeros((NUM_POINTS, 2))
    points[NOSE_INDEX] = nose
    theta = np.pi * np.arange(len(UPPER_FACE_INDICES)) / (len(UPPER_FACE_INDICES) - 1)
    radius = 0.22 * size
    points[UPPER_FACE_INDICES, 0] = nose[0] + radius * np.cos(theta)
    points[UPPER_FACE_INDICES, 1] = nose[1] - radius * np.sin(theta) * (1.0 + 0.15 * brow)
    phi = 2.0 * np.pi * np.arange(len(MOUTH_INDICES)) / len(MOUTH_INDICES)
    points[MOUTH_INDICES, 0] = nose[0] + 0.1 * size * np.cos(phi)
    points[MOUTH_INDICES, 1] = nose[1] + 0.14 * size + _mouth_half_height(size, aperture) * np.sin(phi)
    return points


def _mouth_half_height(size: int, aperture: float) -> float:
    return 0.005 * size + 0.06 * size * aperture


def render_portrait(size: int, colours: np.ndarray, nose: np.ndarray, aperture: float, brow: float) -> Image.Image:
    background, skin, features = (tuple(int(c) for c in colour) for colour in colours)
    img = Image.new("RGB", (size, size), background)
    draw = ImageDraw.Draw(img)

    def disk(cx: float, cy: float, rx: float, ry: float, fill: Tuple[int, ...]) -> None:
        draw.ellipse([cx - rx, cy - ry, cx + rx, cy + ry], fill=fill)

    nx, ny = float(nose[0]), float(nose[1])
    disk(nx, ny, 0.32 * size, 0.32 * size, skin)
    eye_y = ny - 0.1 * size - 0.03 * size * brow
    disk(nx - 0.12 * size, eye_y, 0.04 * size, 0.04 * size, features)
    disk(nx + 0.12 * size, eye_y, 0.04 * size, 0.04 * size, features)
    disk(nx, ny, 0.02 * size, 0.02 * size, features)
    disk(nx, ny + 0.14 * size, 0.1 * size, _mouth_half_height(size, aperture), features)
    return img


def frame_rms(track: AudioTrack, fps: float, num_frames: int) -> np.ndarray:
    hop = int(round(track.sample_rate / fps))
    return np.array([np.sqrt(np.mean(track.samples[i * hop : (i + 1) * hop] ** 2)) for i in range(num_frames)])


def mouth_aperture(kps: KeypointSequence) -> np.ndarray:
    mouth_y = kps.points[:, kps.mouth_indices, 1]
    return mouth_y.max(axis=1) - mouth_y.min(axis=1)


def envelope_mouth_correlation(track: AudioTrack, kps: KeypointSequence, fps: float) -> float:
    """Pearson correlation of per-frame audio loudness and mouth opening."""
    return float(np.corrcoef(frame_rms(track, fps, kps.num_frames), mouth_aperture(kps))[0, 1])


def synth_video(
    rng: np.random.Generator, num_frames: int, image_size: int, fps: float, sample_rate: int
) -> Tuple[List[Image.Image], AudioTrack, KeypointSequence]:
    motion = _random_motion(rng)
    colours = rng.integers(0, 256, size=(3, 3))
    colours[2] = colours[2] // 4  # dark eyes and mouth

    t_frames = (np.arange(num_frames) + 0.5) / fps
    apertures = motion.envelope(t_frames)
    noses = image_size / 2.0 + 0.04 * image_size * motion.head(t_frames)
    brows = motion.brow(t_frames)

    frames = [render_portrait(image_size, colours, n, a, b) for n, a, b in zip(noses, apertures, brows)]
    points = np.stack([face_keypoints(image_size, n, a, b) for n, a, b in zip(noses, apertures, brows)])
    kps = KeypointSequence(points, NOSE_INDEX, UPPER_FACE_INDICES, MOUTH_INDICES)

    n_samples = int(round(num_frames / fps * sample_rate))
    t_samples = np.arange(n_samples) / sample_rate
    samples = 0.6 * motion.envelope(t_samples) * np.sin(2.0 * np.pi * CARRIER_HZ * t_samples)
    samples = np.clip(samples + rng.normal(0.0, 0.005, n_samples), -1.0, 1.0)
    return frames, AudioTrack(samples, sample_rate), kps


@time_function("dataset synthesis")
def synth_dataset(
    root: Union[str, Path],
    n_videos: int,
    frames_per_video: int,
    seed: int = 0,
    image_size: int = 64,
    fps: float = 25.0,
    sample_rate: int = 16000,
) -> DatasetManifest:
    """Write `n_videos` synthetic videos (PNG frames, WAV audio, keypoints) and a manifest under `root`."""
    if frames_per_video < 2:
        raise DatasetError(f"frames_per_video must be at least 2, got {frames_per_video}")
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    videos: List[VideoEntry] = []
    for v in range(n_videos):
        name = f"video_{v:03d}"
        rng = np.random.default_rng((seed, v))
        frames, track, kps = synth_video(rng, frames_per_video, image_size, fps, sample_rate)
        frame_dir = root / name / "frames"
        frame_dir.mkdir(parents=True, exist_ok=True)
        for i, frame in enumerate(frames):
            frame.save(frame_dir / f"frame_{i:05d}.png")
        write_wav(root / name / "audio.wav", track)
        write_keypoints(root / name / "keypoints.jsonl", kps)

        correlation = envelope_mouth_correlation(track, kps, fps)
        if correlation <= 0.9:
            logger.warning("%s: audio/mouth correlation only %.3f", name, correlation)
        videos.append(
            VideoEntry(
                name=name,
                num_frames=frames_per_video,
                frames=f"{name}/frames",
                audio=f"{name}/audio.wav",
                keypoints=f"{name}/keypoints.jsonl",
                envelope_mouth_correlation=correlation,
            )
        )

    manifest = DatasetManifest(seed=seed, fps=fps, sample_rate=sample_rate, image_size=image_size, videos=videos)
    (root / MANIFEST_NAME).write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8")
    logger.info("Wrote %d synthetic videos to %s", n_videos, root)
    return manifest
