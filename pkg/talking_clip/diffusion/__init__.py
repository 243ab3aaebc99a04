from .long_video import LongVideoSource, MotionFrameBuffer, concat_clips, generate_long_video  # noqa
from .noising import NoisePredictor, TrainingSample, add_noise, recover_z0, training_loss  # noqa
from .sampler import (  # noqa
    cfg_combine,
    combine_noise,
    ddim_sample,
    ddim_timesteps,
    guidance_conditions,
    guided_noise,
    initial_noise,
)
