import math
from typing import Optional

import torch
from einops import rearrange
from torch import nn

from talking_clip.core.errors import ShapeMismatch


class Attention(nn.Module):
    """Multi-head scaled dot-product attention over [N, L, D] token batches.

    Query, key and value projections carry no bias, so an all-zero context yields all-zero values.
    The output projection is zero-initialized by default, which turns a residual attention layer into
    the identity until it is trained.
    """

    def __init__(
        self, query_dim: int, heads: int, context_dim: Optional[int] = None, zero_init_out: bool = True
    ) -> None:
        super().__init__()
        if query_dim % heads != 0:
            raise ShapeMismatch(f"query_dim {query_dim} is not divisible by {heads} heads")
        self.heads = heads
        self.scale = 1.0 / math.sqrt(query_dim // heads)
        context_dim = context_dim or query_dim
        self.to_q = nn.Linear(query_dim, query_dim, bias=False)
        self.to_k = nn.Linear(context_dim, query_dim, bias=False)
        self.to_v = nn.Linear(context_dim, query_dim, bias=False)
        self.to_out = nn.Linear(query_dim, query_dim)
        if zero_init_out:
            nn.init.zeros_(self.to_out.weight)
            nn.init.zeros_(self.to_out.bias)

    def forward(self, x: torch.Tensor, context: Optional[torch.Tensor] = None) -> torch.Tensor:
        context = x if context is None else context
        if x.shape[0] != context.shape[0]:
            raise ShapeMismatch(f"query batch {x.shape[0]} != context batch {context.shape[0]}")
        q = rearrange(self.to_q(x), "n i (h d) -> n h i d", h=self.heads)
        k = rearrange(self.to_k(context), "n j (h d) -> n h j d", h=self.heads)
        v = rearrange(self.to_v(context), "n j (h d) -> n h j d", h=self.heads)
        weights = (torch.einsum("nhid,nhjd->nhij", q, k) * self.scale).softmax(dim=-1)
        out = torch.einsum("nhij,nhjd->nhid", weights, v)
        return self.to_out(rearrange(out, "n h i d -> n i (h d)"))
