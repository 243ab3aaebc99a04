import math

import pytest
import torch

from talking_clip.core.errors import ShapeMismatch
from talking_clip.model.attention import Attention
from talking_clip.model.embeddings import TemporalEmbedding, TimestepEmbedding, sinusoidal_embedding


def identity_attention(dim: int) -> Attention:
    attn = Attention(dim, heads=1).double()
    with torch.no_grad():
        for linear in (attn.to_q, attn.to_k, attn.to_v, attn.to_out):
            linear.weight.copy_(torch.eye(dim, dtype=torch.float64))
        attn.to_out.bias.zero_()
    return attn


def test_zero_initialized_output() -> None:
    attn = Attention(8, heads=2)
    assert attn(torch.randn(3, 5, 8)).abs().max().item() == 0.0


def test_hand_computed_attention() -> None:
    attn = identity_attention(2)
    x = torch.tensor([[[1.0, 0.0], [0.0, 2.0]]], dtype=torch.float64)
    out = attn(x)[0]
    scores = torch.tensor([[1.0, 0.0], [0.0, 4.0]], dtype=torch.float64) / math.sqrt(2.0)
    expected = scores.softmax(dim=-1) @ x[0]
    assert torch.allclose(out, expected, atol=1e-12)


def test_cross_attention_batch_mismatch() -> None:
    attn = Attention(4, heads=2, context_dim=3)
    assert attn(torch.randn(2, 5, 4), torch.randn(2, 7, 3)).shape == (2, 5, 4)
    with pytest.raises(ShapeMismatch):
        attn(torch.randn(2, 5, 4), torch.randn(3, 7, 3))
    with pytest.raises(ShapeMismatch):
        Attention(6, heads=4)


def test_sinusoidal_embedding() -> None:
    emb = sinusoidal_embedding(0, 8)
    assert emb.tolist() == [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]
    assert sinusoidal_embedding(5, 7).shape == (7,)
    assert not torch.equal(sinusoidal_embedding(1, 8), sinusoidal_embedding(2, 8))


def test_timestep_embedding_adds_motion_latent() -> None:
    torch.manual_seed(0)
    embedding = TimestepEmbedding(8, 16)
    latent = torch.randn(16)
    assert torch.allclose(embedding(3, latent), embedding(3) + latent)
    with pytest.raises(ShapeMismatch):
        embedding(3, torch.randn(15))


def test_temporal_embedding_positions() -> None:
    embedding = TemporalEmbedding(num_motion=3, num_frames=4, dim=2)
    noisy, motion = embedding(torch.zeros(5, 4, 2), torch.zeros(5, 3, 2))
    assert motion is not None
    assert torch.equal(noisy[0], embedding.noisy_embed)
    assert torch.equal(motion[2], embedding.mf_embed)
    with pytest.raises(ShapeMismatch):
        embedding(torch.zeros(5, 5, 2), None)
    with pytest.raises(ShapeMismatch):
        embedding(torch.zeros(5, 4, 2), torch.zeros(5, 2, 2))
