import dataclasses
from typing import Optional

import numpy as np

from talking_clip.core.errors import EmptyAudio, TalkingClipError, UnsupportedSampleRate

# Extractors expect audio resampled upstream to one of these rates.
SUPPORTED_SAMPLE_RATES = (16000,)


@dataclasses.dataclass(frozen=True)
class AudioTrack:
    samples: np.ndarray  # [n_samples], float in [-1, 1]
    sample_rate: int

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise UnsupportedSampleRate(f"sample rate must be > 0, got {self.sample_rate}")
        if self.samples.ndim != 1:
            raise TalkingClipError(f"audio must be mono [n_samples], got shape {self.samples.shape}")
        if not np.isfinite(self.samples).all():
            raise TalkingClipError("audio samples contain non-finite values")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def check_supported(self) -> "AudioTrack":
        if len(self.samples) == 0:
            raise EmptyAudio("audio track has no samples")
        if self.sample_rate not in SUPPORTED_SAMPLE_RATES:
            raise UnsupportedSampleRate(
                f"sample rate {self.sample_rate} Hz is not supported, resample to one of {SUPPORTED_SAMPLE_RATES}"
            )
        return self


@dataclasses.dataclass(frozen=True)
class AudioEmbeddingSequence:
    embed: np.ndarray  # [n_video_frames, 5, D]
    source: str


def num_video_frames(track: AudioTrack, fps: float) -> int:
    return int(np.floor(len(track.samples) * fps / track.sample_rate + 1e-9))


def silence(seconds: float, sample_rate: int = 16000) -> AudioTrack:
    return AudioTrack(np.zeros(int(round(seconds * sample_rate))), sample_rate)


def white_noise(seconds: float, sample_rate: int = 16000, seed: int = 0, amplitude: float = 0.3) -> AudioTrack:
    rng = np.random.default_rng(seed)
    samples = np.clip(rng.normal(0.0, amplitude, int(round(seconds * sample_rate))), -1.0, 1.0)
    return AudioTrack(samples, sample_rate)


def tone(
    seconds: float,
    freq: float = 220.0,
    sample_rate: int = 16000,
    envelope: Optional[np.ndarray] = None,
    amplitude: float = 0.5,
) -> AudioTrack:
    """Sine tone, optionally amplitude-modulated by a per-sample envelope."""
    t = np.arange(int(round(seconds * sample_rate))) / sample_rate
    samples = amplitude * np.sin(2.0 * np.pi * freq * t)
    if envelope is not None:
        samples = samples * envelope[: len(samples)]
    return AudioTrack(samples, sample_rate)
