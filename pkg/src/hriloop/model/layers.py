"""Small shared building blocks."""

from __future__ import annotations

import math

import torch
from torch import nn
from torch.nn import functional as F


def sinusoidal_positions(length: int, dim: int, device=None, dtype=None) -> torch.Tensor:
    """Standard fixed sine/cosine position table, shape (length, dim)."""
    pos = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    half = dim // 2
    freq = torch.exp(
        torch.arange(half, dtype=torch.float64) * (-math.log(10000.0) / max(half - 1, 1))
    )
    table = torch.zeros(length, dim, dtype=torch.float64)
    table[:, 0::2] = torch.sin(pos * freq)[:, : (dim + 1) // 2]
    table[:, 1::2] = torch.cos(pos * freq)[:, : dim // 2]
    return table.to(device=device, dtype=dtype or torch.get_default_dtype())


class ReplicatePadConv1d(nn.Module):
    """Conv1d with replicate padding so constant signals stay constant in
    time (and stride-2 halving keeps edges well-defined)."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int = 3, stride: int = 1):
        super().__init__()
        self.pad = kernel // 2
        self.conv = nn.Conv1d(in_ch, out_ch, kernel, stride=stride)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: (B, C, T)
        return self.conv(F.pad(x, (self.pad, self.pad), mode="replicate"))


class Mlp(nn.Module):
    def __init__(self, dims: list[int]):
        super().__init__()
        layers: list[nn.Module] = []
        for a, b in zip(dims, dims[1:]):
            layers.append(nn.Linear(a, b))
            layers.append(nn.GELU())
        layers.pop()  # no activation after the last linear
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class CrossAttentionBlock(nn.Module):
    """Pre-norm block: self-attention over queries, cross-attention to a
    memory, feed-forward."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.self_attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.cross_attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.ffn = Mlp([dim, 2 * dim, dim])
        self.n1 = nn.LayerNorm(dim)
        self.n2 = nn.LayerNorm(dim)
        self.n3 = nn.LayerNorm(dim)

    def forward(self, q: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
        h = self.n1(q)
        q = q + self.self_attn(h, h, h, need_weights=False)[0]
        h = self.n2(q)
        q = q + self.cross_attn(h, memory, memory, need_weights=False)[0]
        return q + self.ffn(self.n3(q))


def encoder_stack(dim: int, heads: int, layers: int) -> nn.TransformerEncoder:
    layer = nn.TransformerEncoderLayer(
        dim,
        heads,
        dim_feedforward=2 * dim,
        dropout=0.0,
        activation="gelu",
        batch_first=True,
        norm_first=True,
    )
    return nn.TransformerEncoder(layer, layers, enable_nested_tensor=False)


def use_single_thread() -> None:
    """Tiny-tensor workloads thrash on multiple intra-op threads (measured
    ~10x slower at 4 threads); everything here qualifies."""
    torch.set_num_threads(1)
