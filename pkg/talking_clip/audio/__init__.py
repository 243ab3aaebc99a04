from .extractor import (  # noqa
    AudioExtractor,
    create_extractor,
    embed_audio,
    extract_per_frame_features,
    register_extractor,
    registered_extractors,
)
from .mel_extractor import DEFAULT_EXTRACTOR, LogMelExtractor  # noqa
from .track import AudioEmbeddingSequence, AudioTrack, num_video_frames, silence, tone, white_noise  # noqa
from .wav import read_wav, write_wav  # noqa
from .window import window_stack  # noqa
