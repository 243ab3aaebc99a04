"""Audio-to-latents module.

Maps one condition (pooled audio, head movement variance or expression variance) to a single query
token that attends over a bank of learnable embeddings. The attended value, projected to the
timestep-embedding width, is the motion latent added to the timestep embedding.
"""

import dataclasses
import math
from typing import Optional

import numpy as np
import torch
from torch import nn

from talking_clip.core.config import ModelConfig
from talking_clip.core.errors import ShapeMismatch, UnknownConditionTag
from talking_clip.core.types import ConditionBundle

AUDIO_TAG = "audio"
HEAD_MOVE_TAG = "head_move"
EXPRESSION_TAG = "expression"
CONDITION_TAGS = (AUDIO_TAG, HEAD_MOVE_TAG, EXPRESSION_TAG)


@dataclasses.dataclass(frozen=True)
class TaggedCondition:
    tag: str
    value: torch.Tensor  # [F, 5, A] audio window or a scalar variance


def audio_condition(bundle: ConditionBundle) -> TaggedCondition:
    return TaggedCondition(AUDIO_TAG, bundle.audio_embed)


def condition_from_bundle(bundle: ConditionBundle, tag: str) -> TaggedCondition:
    if tag == AUDIO_TAG:
        return audio_condition(bundle)
    if tag == HEAD_MOVE_TAG:
        return TaggedCondition(tag, torch.tensor(bundle.head_move_var, dtype=torch.float64))
    if tag == EXPRESSION_TAG:
        return TaggedCondition(tag, torch.tensor(bundle.expr_var, dtype=torch.float64))
    raise UnknownConditionTag(f"unknown condition tag '{tag}', expected one of {CONDITION_TAGS}")


def sample_training_condition(
    bundle: ConditionBundle, rng: np.random.Generator, training: bool = True
) -> TaggedCondition:
    """Pick the audio, head-move or expression condition with equal probability; audio at test time."""
    if not training:
        return audio_condition(bundle)
    return condition_from_bundle(bundle, CONDITION_TAGS[int(rng.integers(0, len(CONDITION_TAGS)))])


class AttentionPooling(nn.Module):
    """Pool [L, D] tokens into [D] with a learned scoring vector."""

    def __init__(self, dim: int) -> None:
        super().__init__()
        self.query = nn.Linear(dim, 1, bias=False)
        self.norm = nn.LayerNorm(dim)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        scores = self.query(tokens).squeeze(-1) / math.sqrt(tokens.shape[-1])
        weights = torch.softmax(scores, dim=-1)
        return self.norm((tokens * weights.unsqueeze(-1)).sum(dim=0))


class MotionLatentBank(nn.Module):
    def __init__(
        self,
        audio_dim: int,
        n_embeddings: int,
        qkv_dim: int,
        out_dim: int,
        pooling: str = "mean",
    ) -> None:
        super().__init__()
        self.audio_dim = audio_dim
        self.scale = 1.0 / math.sqrt(qkv_dim)
        self.learnable_embeddings = nn.Parameter(torch.randn(n_embeddings, qkv_dim) * 0.02)
        self.query_proj = nn.ModuleDict(
            {
                AUDIO_TAG: nn.Linear(audio_dim, qkv_dim),
                HEAD_MOVE_TAG: nn.Linear(1, qkv_dim),
                EXPRESSION_TAG: nn.Linear(1, qkv_dim),
            }
        )
        self.to_k = nn.Linear(qkv_dim, qkv_dim)
        self.to_v = nn.Linear(qkv_dim, qkv_dim)
        self.to_out = nn.Linear(qkv_dim, out_dim)
        # Zero motion latent until trained: a fresh stage-2 model reproduces the stage-1 forward.
        nn.init.zeros_(self.to_out.weight)
        nn.init.zeros_(self.to_out.bias)
        self.audio_pool: Optional[AttentionPooling] = AttentionPooling(audio_dim) if pooling == "attention" else None

    def query_input(self, condition: TaggedCondition) -> torch.Tensor:
        dtype = self.to_k.weight.dtype
        if condition.tag == AUDIO_TAG:
            if condition.value.shape[-1] != self.audio_dim:
                raise ShapeMismatch(f"audio feature dim {condition.value.shape[-1]} != {self.audio_dim}")
            tokens = condition.value.reshape(-1, self.audio_dim).to(dtype)
            return tokens.mean(dim=0) if self.audio_pool is None else self.audio_pool(tokens)
        if condition.tag in (HEAD_MOVE_TAG, EXPRESSION_TAG):
            return torch.log1p(condition.value.to(dtype).reshape(1))
        raise UnknownConditionTag(f"unknown condition tag '{condition.tag}', expected one of {CONDITION_TAGS}")

    def forward(self, condition: TaggedCondition) -> torch.Tensor:
        """Motion latent [out_dim] of one condition."""
        x = self.query_input(condition)
        q = self.query_proj[condition.tag](x).unsqueeze(0)
        k = self.to_k(self.learnable_embeddings)
        v = self.to_v(self.learnable_embeddings)
        weights = torch.softmax(q @ k.T * self.scale, dim=-1)
        return self.to_out((weights @ v).squeeze(0))


def build_bank(cfg: ModelConfig) -> MotionLatentBank:
    return MotionLatentBank(
        cfg.audio_feature_dim,
        cfg.n_learnable_embeddings,
        cfg.qkv_dim,
        cfg.time_embed_dim,
        cfg.audio_pooling,
    )


def to_motion_latent(condition: TaggedCondition, bank: MotionLatentBank) -> torch.Tensor:
    return bank(condition)
