import dataclasses
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Tuple, Type, TypeVar, Union

from talking_clip.core.errors import (
    ConfigError,
    InvalidConfigError,
    NonPositiveDim,
    ScheduleOverrun,
)

logger = logging.getLogger("config")

TSM_STRATEGIES = ("uniform", "mean", "random")
TEMPORAL_LAYERS = ("dual", "single")
AUDIO_POOLINGS = ("mean", "attention")
KEYPOINT_REDUCTIONS = ("mean", "sum")


@dataclasses.dataclass(frozen=True)
class DropoutRates:
    """Training-time condition mask/drop probabilities."""

    audio: float = 0.10
    motion_latents: float = 0.10
    ref_drop: float = 0.15
    mf_mask: float = 0.40


@dataclasses.dataclass(frozen=True)
class GuidanceConfig:
    audio_ratio: float = 5.0
    ref_ratio: float = 3.0
    sample_steps: int = 25


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-2
    batch_size: int = 4
    steps: int = 200
    log_every: int = 10
    checkpoint_every: int = 100


@dataclasses.dataclass(frozen=True)
class MetricConfig:
    window: int = 12
    ddof: int = 0
    keypoint_reduction: str = "mean"


@dataclasses.dataclass(frozen=True)
class ModelConfig:
    """Every architectural, schedule and run setting of a model.

    The defaults are the desk-scale toy preset, see `PRESETS` for the full-scale one.
    """

    clip_len: int = 4
    motion_frame_len: int = 14
    tsm_stride: int = 2
    tsm_expand_ratio: int = 2
    tsm_segments: int = 3
    tsm_strategy: str = "uniform"
    tsm_enabled: bool = True
    plain_motion_frames: int = 4
    latent_channels: int = 4
    latent_height: int = 8
    latent_width: int = 8
    image_size: int = 64
    audio_feature_dim: int = 32
    audio_sample_rate: int = 16000
    fps: float = 25.0
    n_learnable_embeddings: int = 16
    qkv_dim: int = 32
    time_embed_dim: int = 64
    unet_channel_schedule: Tuple[int, ...] = (32, 64)
    attention_heads: int = 4
    norm_groups: int = 8
    noise_steps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 2e-2
    temporal_layers: str = "dual"
    audio_after_intra: bool = False
    use_audio_to_latents: bool = True
    audio_pooling: str = "mean"
    seed: int = 0
    dropout: DropoutRates = DropoutRates()
    guidance: GuidanceConfig = GuidanceConfig()
    train: TrainConfig = TrainConfig()
    metrics: MetricConfig = MetricConfig()

    @property
    def segment_coverage(self) -> int:
        """Raw motion frames covered by the segment schedule."""
        if not self.tsm_enabled:
            return self.plain_motion_frames
        return sum(self.tsm_stride * self.tsm_expand_ratio**i for i in range(self.tsm_segments))

    @property
    def n_motion_slots(self) -> int:
        """Number of abstracted motion frames fed to the inter-clip layer."""
        if not self.tsm_enabled:
            return self.plain_motion_frames
        return self.tsm_stride * self.tsm_segments

    @property
    def patch_size(self) -> int:
        return self.image_size // self.latent_height


PRESETS: Dict[str, ModelConfig] = {
    "toy": ModelConfig(),
    "full": ModelConfig(
        clip_len=12,
        motion_frame_len=124,
        tsm_stride=4,
        tsm_expand_ratio=2,
        tsm_segments=5,
        latent_channels=4,
        latent_height=64,
        latent_width=64,
        image_size=512,
        audio_feature_dim=768,
        n_learnable_embeddings=128,
        qkv_dim=256,
        time_embed_dim=1280,
        unet_channel_schedule=(320, 640, 1280),
        attention_heads=8,
        norm_groups=32,
        train=TrainConfig(lr=1e-5, batch_size=24, steps=100_000, log_every=100, checkpoint_every=5000),
    ),
}


def _positive_fields(cfg: ModelConfig) -> Dict[str, Union[int, float]]:
    return {
        "clip_len": cfg.clip_len,
        "tsm_stride": cfg.tsm_stride,
        "tsm_expand_ratio": cfg.tsm_expand_ratio,
        "tsm_segments": cfg.tsm_segments,
        "plain_motion_frames": cfg.plain_motion_frames,
        "latent_channels": cfg.latent_channels,
        "latent_height": cfg.latent_height,
        "latent_width": cfg.latent_width,
        "image_size": cfg.image_size,
        "audio_feature_dim": cfg.audio_feature_dim,
        "audio_sample_rate": cfg.audio_sample_rate,
        "fps": cfg.fps,
        "n_learnable_embeddings": cfg.n_learnable_embeddings,
        "qkv_dim": cfg.qkv_dim,
        "time_embed_dim": cfg.time_embed_dim,
        "attention_heads": cfg.attention_heads,
        "norm_groups": cfg.norm_groups,
        "noise_steps": cfg.noise_steps,
        "guidance.sample_steps": cfg.guidance.sample_steps,
        "train.batch_size": cfg.train.batch_size,
        "train.log_every": cfg.train.log_every,
        "train.checkpoint_every": cfg.train.checkpoint_every,
        "metrics.window": cfg.metrics.window,
    }


def _collect_violations(cfg: ModelConfig) -> List[ConfigError]:
    violations: List[ConfigError] = []

    for name, value in _positive_fields(cfg).items():
        if value <= 0:
            violations.append(NonPositiveDim(f"{name} must be > 0, got {value}"))
    if cfg.motion_frame_len < 0:
        violations.append(NonPositiveDim(f"motion_frame_len must be >= 0, got {cfg.motion_frame_len}"))
    if cfg.train.steps < 0:
        violations.append(NonPositiveDim(f"train.steps must be >= 0, got {cfg.train.steps}"))
    if cfg.train.weight_decay < 0:
        violations.append(ConfigError(f"train.weight_decay must be >= 0, got {cfg.train.weight_decay}"))
    if len(cfg.unet_channel_schedule) == 0:
        violations.append(NonPositiveDim("unet_channel_schedule must not be empty"))
    for ch in cfg.unet_channel_schedule:
        if ch <= 0:
            violations.append(NonPositiveDim(f"unet_channel_schedule entries must be > 0, got {ch}"))
        elif cfg.norm_groups > 0 and cfg.attention_heads > 0:
            if ch % cfg.norm_groups != 0:
                violations.append(ConfigError(f"channel width {ch} is not divisible by norm_groups {cfg.norm_groups}"))
            if ch % cfg.attention_heads != 0:
                violations.append(
                    ConfigError(f"channel width {ch} is not divisible by attention_heads {cfg.attention_heads}")
                )

    dims_ok = all(
        v > 0 for v in (cfg.tsm_stride, cfg.tsm_expand_ratio, cfg.tsm_segments, cfg.plain_motion_frames)
    )
    if dims_ok and cfg.segment_coverage > cfg.motion_frame_len:
        violations.append(
            ScheduleOverrun(
                f"segments cover {cfg.segment_coverage} raw frames but motion_frame_len is {cfg.motion_frame_len}"
            )
        )

    if cfg.latent_height > 0 and cfg.latent_width > 0 and cfg.image_size > 0:
        if cfg.image_size % cfg.latent_height != 0 or cfg.image_size % cfg.latent_width != 0:
            violations.append(ConfigError("image_size must be a multiple of latent_height and latent_width"))
        elif cfg.latent_height != cfg.latent_width:
            violations.append(ConfigError("latent_height and latent_width must be equal (square patches)"))
        elif cfg.latent_channels > 3 * cfg.patch_size**2:
            violations.append(ConfigError(f"latent_channels cannot exceed 3 * patch_size^2 = {3 * cfg.patch_size**2}"))
    n_levels = len(cfg.unet_channel_schedule)
    if n_levels > 0 and cfg.latent_height > 0 and cfg.latent_height % (2 ** (n_levels - 1)) != 0:
        violations.append(ConfigError(f"latent_height must be divisible by 2^{n_levels - 1} for the U-Net levels"))

    if not 0.0 < cfg.beta_start < cfg.beta_end < 1.0:
        violations.append(ConfigError(f"need 0 < beta_start < beta_end < 1, got {cfg.beta_start}, {cfg.beta_end}"))

    for enum_name, value, allowed in (
        ("tsm_strategy", cfg.tsm_strategy, TSM_STRATEGIES),
        ("temporal_layers", cfg.temporal_layers, TEMPORAL_LAYERS),
        ("audio_pooling", cfg.audio_pooling, AUDIO_POOLINGS),
        ("metrics.keypoint_reduction", cfg.metrics.keypoint_reduction, KEYPOINT_REDUCTIONS),
    ):
        if value not in allowed:
            violations.append(ConfigError(f"{enum_name} must be one of {allowed}, got '{value}'"))

    for rate_field in dataclasses.fields(cfg.dropout):
        rate = getattr(cfg.dropout, rate_field.name)
        if not 0.0 <= rate <= 1.0:
            violations.append(ConfigError(f"dropout.{rate_field.name} must be in [0, 1], got {rate}"))
    if cfg.metrics.ddof < 0:
        violations.append(ConfigError(f"metrics.ddof must be >= 0, got {cfg.metrics.ddof}"))
    if cfg.train.lr <= 0:
        violations.append(ConfigError(f"train.lr must be > 0, got {cfg.train.lr}"))

    return violations


def validate_config(cfg: ModelConfig) -> ModelConfig:
    """Return `cfg` unchanged if every invariant holds, raise InvalidConfigError otherwise."""
    violations = _collect_violations(cfg)
    if len(violations) > 0:
        raise InvalidConfigError(violations)
    return cfg


_T = TypeVar("_T")


def _from_dict(cls: Type[_T], data: Mapping[str, Any], defaults: _T, where: str) -> _T:
    if not isinstance(data, Mapping):
        raise ConfigError(f"'{where or 'config'}' must be a JSON object")
    known = {f.name: f for f in dataclasses.fields(cls)}  # type: ignore[arg-type]
    unknown = sorted(set(data) - set(known))
    if len(unknown) > 0:
        raise ConfigError(f"unknown config keys in '{where or 'config'}': {', '.join(unknown)}")

    values: Dict[str, Any] = {}
    for name, value in data.items():
        key = f"{where}.{name}" if where else name
        default = getattr(defaults, name)
        if dataclasses.is_dataclass(default):
            values[name] = _from_dict(type(default), value, default, key)
        elif isinstance(default, tuple):
            if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
                raise ConfigError(f"'{key}' must be a list of integers")
            values[name] = tuple(value)
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"'{key}' must be a boolean, got {type(value).__name__}")
            values[name] = value
        elif isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"'{key}' must be an integer, got {type(value).__name__}")
            values[name] = value
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"'{key}' must be a number, got {type(value).__name__}")
            values[name] = float(value)
        elif isinstance(default, str):
            if not isinstance(value, str):
                raise ConfigError(f"'{key}' must be a string, got {type(value).__name__}")
            values[name] = value
        else:
            raise ConfigError(f"'{key}' has unsupported type")  # pragma: no cover

    return dataclasses.replace(defaults, **values)  # type: ignore[type-var]


def config_from_dict(data: Mapping[str, Any], base: ModelConfig = PRESETS["toy"]) -> ModelConfig:
    """Strictly parse a config mapping on top of `base`. Unknown keys are an error."""
    return _from_dict(ModelConfig, data, base, "")


def config_to_dict(cfg: ModelConfig) -> Dict[str, Any]:
    data = dataclasses.asdict(cfg)
    data["unet_channel_schedule"] = list(cfg.unet_channel_schedule)
    return data


def dump_config(cfg: ModelConfig) -> str:
    """Canonical JSON text of a config (sorted keys, no whitespace variance)."""
    return json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))


def config_hash(cfg: ModelConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode("utf-8")).hexdigest()


def load_config(source: Union[str, Path, None]) -> ModelConfig:
    """Load and validate a config from a preset name or a JSON file.

    A JSON file may carry a top level "preset" key naming the preset it overrides.
    """
    if source is None:
        return validate_config(PRESETS["toy"])
    if str(source) in PRESETS:
        logger.debug("Using preset '%s'", source)
        return validate_config(PRESETS[str(source)])

    path = Path(source)
    if not path.is_file():
        raise ConfigError(f"config file '{path}' does not exist")
    try:
        data = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file '{path}' is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file '{path}' must hold a JSON object")

    preset = data.pop("preset", "toy")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset '{preset}', expected one of {sorted(PRESETS)}")
    cfg = config_from_dict(data, PRESETS[preset])
    logger.info("Loaded config from %s (preset %s)", path, preset)
    return validate_config(cfg)
