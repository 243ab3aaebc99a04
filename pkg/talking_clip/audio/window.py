import numpy as np

from talking_clip.core.errors import ShapeMismatch
from talking_clip.core.types import AUDIO_WINDOW


def window_stack(features: np.ndarray) -> np.ndarray:
    """Stack each frame with its two preceding and two succeeding frames, clamping at the edges.

    [n, D] -> [n, 5, D]; row f is features[f-2 .. f+2] with indices clamped to [0, n-1].
    """
    if features.ndim != 2 or features.shape[0] < 1:
        raise ShapeMismatch(f"features must be [n >= 1, D], got {features.shape}")
    n = features.shape[0]
    half = AUDIO_WINDOW // 2
    index = np.clip(np.arange(n)[:, None] + np.arange(-half, half + 1)[None, :], 0, n - 1)
    return features[index]


def fit_frames(features: np.ndarray, num_frames: int) -> np.ndarray:
    """Truncate, or extend by repeating the last row, to exactly `num_frames` rows."""
    if features.shape[0] >= num_frames:
        return features[:num_frames]
    pad = np.repeat(features[-1:], num_frames - features.shape[0], axis=0)
    return np.concatenate([features, pad], axis=0)
