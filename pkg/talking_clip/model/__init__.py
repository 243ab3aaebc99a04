from .audio_to_latents import (  # noqa
    CONDITION_TAGS,
    MotionLatentBank,
    TaggedCondition,
    sample_training_condition,
    to_motion_latent,
)
from .denoiser import Denoiser, DenoiserInputs  # noqa
from .reference_net import ReferenceFeatureCache, ReferenceNet, extract_reference_features, inject_spatial  # noqa
from .talking_model import TalkingClipModel, denoise  # noqa
