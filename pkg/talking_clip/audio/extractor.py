import logging
from typing import Callable, Dict, Type

import numpy as np

from talking_clip.audio.track import AudioEmbeddingSequence, AudioTrack, num_video_frames
from talking_clip.audio.window import fit_frames, window_stack
from talking_clip.core.errors import EmptyAudio, ShapeMismatch, TalkingClipError
from talking_clip.utils.debug_timer import time_function

logger = logging.getLogger("data")


class AudioExtractor:
    """Turns an audio track into one feature vector per video frame.

    Subclasses implement `frame_features`. An adapter for a pretrained speech encoder would run the
    encoder, concatenate the hidden states of every layer per audio step, resample the result to the
    video frame rate and project it to `feature_dim`."""

    name = "base"

    def __init__(self, feature_dim: int, seed: int = 0) -> None:
        if feature_dim <= 0:
            raise TalkingClipError(f"feature_dim must be > 0, got {feature_dim}")
        self.feature_dim = feature_dim
        self.seed = seed

    def frame_features(self, track: AudioTrack, fps: float, num_frames: int) -> np.ndarray:
        """Returns [num_frames, feature_dim] features of a validated track."""
        raise NotImplementedError()

    def extract(self, track: AudioTrack, fps: float) -> np.ndarray:
        track.check_supported()
        num_frames = num_video_frames(track, fps)
        if num_frames == 0:
            raise EmptyAudio(f"{track.duration:.4f} s of audio is shorter than one video frame at {fps} fps")
        features = self.frame_features(track, fps, num_frames)
        if features.shape != (num_frames, self.feature_dim):
            raise ShapeMismatch(
                f"extractor '{self.name}' returned {features.shape}, expected {(num_frames, self.feature_dim)}"
            )
        return features


_EXTRACTORS: Dict[str, Type[AudioExtractor]] = {}


def register_extractor(name: str) -> Callable[[Type[AudioExtractor]], Type[AudioExtractor]]:
    def register(cls: Type[AudioExtractor]) -> Type[AudioExtractor]:
        cls.name = name
        _EXTRACTORS[name] = cls
        return cls

    return register


def registered_extractors() -> Dict[str, Type[AudioExtractor]]:
    return dict(_EXTRACTORS)


def create_extractor(name: str, feature_dim: int, seed: int = 0) -> AudioExtractor:
    if name not in _EXTRACTORS:
        raise TalkingClipError(f"unknown audio extractor '{name}', registered: {sorted(_EXTRACTORS)}")
    return _EXTRACTORS[name](feature_dim, seed)


def extract_per_frame_features(track: AudioTrack, fps: float, extractor: AudioExtractor) -> np.ndarray:
    return extractor.extract(track, fps)


@time_function("audio embedding")
def embed_audio(
    track: AudioTrack, fps: float, extractor: AudioExtractor, num_frames: int = 0
) -> AudioEmbeddingSequence:
    """5-frame windowed embeddings; `num_frames` > 0 truncates or edge-extends to that many frames."""
    features = extract_per_frame_features(track, fps, extractor)
    if num_frames > 0:
        features = fit_frames(features, num_frames)
    logger.debug("Extracted %d audio frames with '%s'", features.shape[0], extractor.name)
    return AudioEmbeddingSequence(embed=window_stack(features), source=extractor.name)
