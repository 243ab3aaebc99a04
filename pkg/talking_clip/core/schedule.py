import dataclasses

import torch

from talking_clip.core.config import ModelConfig
from talking_clip.core.errors import ConfigError, TOutOfRange


@dataclasses.dataclass(frozen=True)
class DiffusionSchedule:
    """DDPM noise schedule constants, stored in float64."""

    betas: torch.Tensor
    alphas: torch.Tensor
    alpha_cumprod: torch.Tensor

    @property
    def num_steps(self) -> int:
        return int(self.betas.shape[0])

    def check_t(self, t: int) -> int:
        if not 0 <= t < self.num_steps:
            raise TOutOfRange(f"timestep {t} outside [0, {self.num_steps})")
        return t


def linear_schedule(num_steps: int, beta_start: float = 1e-4, beta_end: float = 2e-2) -> DiffusionSchedule:
    if num_steps <= 0:
        raise ConfigError(f"num_steps must be > 0, got {num_steps}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ConfigError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    betas = torch.linspace(beta_start, beta_end, num_steps, dtype=torch.float64)
    alphas = 1.0 - betas
    return DiffusionSchedule(betas=betas, alphas=alphas, alpha_cumprod=torch.cumprod(alphas, dim=0))


def schedule_for(cfg: ModelConfig) -> DiffusionSchedule:
    return linear_schedule(cfg.noise_steps, cfg.beta_start, cfg.beta_end)
