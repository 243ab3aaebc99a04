import logging
from pathlib import Path
from typing import Union

import numpy as np
import soundfile as sf

from talking_clip.audio.track import AudioTrack
from talking_clip.core.errors import UnsupportedAudioFormat

logger = logging.getLogger("data")


def read_wav(path: Union[str, Path]) -> AudioTrack:
    """Read a mono 16-bit PCM WAV file."""
    path = Path(path)
    if not path.is_file():
        raise UnsupportedAudioFormat(f"audio file '{path}' does not exist")
    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise UnsupportedAudioFormat(f"cannot read '{path}': {e}") from e
    if info.format != "WAV" or info.subtype != "PCM_16":
        raise UnsupportedAudioFormat(f"'{path}' is {info.format}/{info.subtype}, expected WAV/PCM_16")
    if info.channels != 1:
        raise UnsupportedAudioFormat(f"'{path}' has {info.channels} channels, expected mono")
    samples, sample_rate = sf.read(str(path), dtype="float64")
    logger.debug("Read %s: %d samples at %d Hz", path, len(samples), sample_rate)
    return AudioTrack(np.asarray(samples, dtype=np.float64), int(sample_rate))


def write_wav(path: Union[str, Path], track: AudioTrack) -> None:
    sf.write(str(path), np.clip(track.samples, -1.0, 1.0), track.sample_rate, subtype="PCM_16", format="WAV")
