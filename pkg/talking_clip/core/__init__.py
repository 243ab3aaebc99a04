from .config import (  # noqa
    PRESETS,
    DropoutRates,
    GuidanceConfig,
    MetricConfig,
    ModelConfig,
    TrainConfig,
    config_hash,
    load_config,
    validate_config,
)
from .schedule import DiffusionSchedule, linear_schedule, schedule_for  # noqa
from .types import AUDIO_WINDOW, ConditionBundle, LatentClip, empty_condition  # noqa
