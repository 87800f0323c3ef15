"""Hierarchical temporal encoder for the observed human joint sequence.

Three feature streams at full, half, and quarter temporal resolution:
the full-resolution stream is purely convolutional (local motion nuance),
the two downsampled streams add self-attention (longer-range intent). All
three are upsampled back to the input rate and concatenated per timestep.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from .config import ModelConfig
from .layers import ReplicatePadConv1d, encoder_stack, sinusoidal_positions


class MrhfEncoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        in_dim = config.human_joints * 3
        self.low1 = ReplicatePadConv1d(in_dim, config.d_low)
        self.low2 = ReplicatePadConv1d(config.d_low, config.d_low)
        self.mid_down = ReplicatePadConv1d(config.d_low, config.d_mid, stride=2)
        self.mid_attn = encoder_stack(config.d_mid, 2, 1)
        self.high_down = ReplicatePadConv1d(config.d_mid, config.d_high, stride=2)
        self.high_attn = encoder_stack(config.d_high, 2, 1)

    def levels(self, x: torch.Tensor) -> dict[str, torch.Tensor]:
        """x: (B, T, J*3) -> low/mid/high streams, each (B, T', d)."""
        h = x.transpose(1, 2)  # (B, C, T)
        low = self.low2(torch.nn.functional.gelu(self.low1(h)))  # (B, d_low, T)
        mid = self.mid_down(F.gelu(low))  # (B, d_mid, ceil(T/2))
        mid_t = mid.transpose(1, 2)
        mid_t = mid_t + sinusoidal_positions(
            mid_t.shape[1], mid_t.shape[2], device=mid_t.device, dtype=mid_t.dtype
        )
        mid_t = self.mid_attn(mid_t)
        high = self.high_down(F.gelu(mid_t.transpose(1, 2)))
        high_t = high.transpose(1, 2)
        high_t = high_t + sinusoidal_positions(
            high_t.shape[1], high_t.shape[2], device=high_t.device, dtype=high_t.dtype
        )
        high_t = self.high_attn(high_t)
        return {
            "low": low.transpose(1, 2),
            "mid": mid_t,
            "high": high_t,
        }

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """x: (B, T, J*3) -> (B, T, d_low + d_mid + d_high)."""
        t = x.shape[1]
        lv = self.levels(x)

        def up(f: torch.Tensor) -> torch.Tensor:
            if f.shape[1] == t:
                return f
            return F.interpolate(
                f.transpose(1, 2), size=t, mode="linear", align_corners=True
            ).transpose(1, 2)

        return torch.cat([lv["low"], up(lv["mid"]), up(lv["high"])], dim=-1)
