import librosa
import numpy as np

from talking_clip.audio.extractor import AudioExtractor, register_extractor
from talking_clip.audio.track import AudioTrack
from talking_clip.audio.window import fit_frames

N_MELS = 64
WINDOW_SECONDS = 0.025
LOG_FLOOR = 1e-6


@register_extractor("log_mel")
class LogMelExtractor(AudioExtractor):
    """Log-mel filterbank (64 bands, 25 ms window, one hop per video frame) followed by a fixed
    random projection to `feature_dim`."""

    def __init__(self, feature_dim: int, seed: int = 0) -> None:
        super().__init__(feature_dim, seed)
        rng = np.random.default_rng(seed)
        self.projection = rng.standard_normal((N_MELS, feature_dim)) / np.sqrt(N_MELS)

    def log_mel(self, track: AudioTrack, fps: float) -> np.ndarray:
        """[n_hops, 64] log-mel frames."""
        sr = track.sample_rate
        win_length = int(round(WINDOW_SECONDS * sr))
        hop_length = int(round(sr / fps))
        n_fft = 1 << (win_length - 1).bit_length()
        mel = librosa.feature.melspectrogram(
            y=track.samples.astype(np.float64),
            sr=sr,
            n_fft=n_fft,
            hop_length=hop_length,
            win_length=win_length,
            n_mels=N_MELS,
            center=True,
            power=2.0,
        )
        return np.log(mel + LOG_FLOOR).T

    def frame_features(self, track: AudioTrack, fps: float, num_frames: int) -> np.ndarray:
        return fit_frames(self.log_mel(track, fps), num_frames) @ self.projection


DEFAULT_EXTRACTOR = LogMelExtractor.name
