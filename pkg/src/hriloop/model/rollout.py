"""Receding-horizon motion generation stages.

The encoder fuses robot history with the hierarchical human features; the
affordance-guided predictor turns future-step queries, pooled distance-field
summaries, and the command embedding into fused future features; the decoder
cross-attends those to the human features and emits per-step residuals on
top of the last observed robot frame.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from .config import ModelConfig
from .layers import CrossAttentionBlock, Mlp, encoder_stack, sinusoidal_positions


class RolloutEncoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        d = config.d_model
        self.in_proj = nn.Linear(config.robot_frame_dim + config.mrhf_dim, d)
        self.encoder = encoder_stack(d, config.heads, config.encoder_layers)

    def forward(self, robot_hist: torch.Tensor, mrhf: torch.Tensor) -> torch.Tensor:
        """(B, T, frame_dim), (B, T, mrhf_dim) -> (B, T, d_model)."""
        tokens = self.in_proj(torch.cat([robot_hist, mrhf], dim=-1))
        tokens = tokens + sinusoidal_positions(
            tokens.shape[1], tokens.shape[2], device=tokens.device, dtype=tokens.dtype
        )
        return self.encoder(tokens)


class AffordanceGuidedPredictor(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        d = config.d_model
        d_a = config.d_vertex
        self.aff_point = Mlp([2, d_a, d_a])  # per-vertex over the E channels
        self.aff_proj = nn.Linear(2 * d_a, d)
        self.cmd_proj = nn.Linear(config.command_dim, d)
        self.query = nn.Parameter(torch.randn(config.horizon, d) * 0.02)
        self.block = CrossAttentionBlock(d, config.heads)

    def forward(
        self,
        robot_feats: torch.Tensor,  # (B, T, d_model)
        affordance: torch.Tensor,  # (B, k, E, V)
        cmd: torch.Tensor,  # (B, command_dim)
    ) -> torch.Tensor:
        b, k, e, v = affordance.shape
        per_vertex = self.aff_point(affordance.permute(0, 1, 3, 2))  # (B, k, V, d_a)
        # Mean and min pools: the closest-approach structure of the field is
        # what steers contact, so keep the minimum explicitly.
        summary = torch.cat(
            [per_vertex.mean(dim=2), per_vertex.min(dim=2).values], dim=-1
        )
        q = (
            self.query.unsqueeze(0).expand(b, -1, -1).to(robot_feats.dtype)
            + self.aff_proj(summary)
            + self.cmd_proj(cmd).unsqueeze(1)
        )
        q = q + sinusoidal_positions(k, q.shape[-1], device=q.device, dtype=q.dtype)
        return self.block(q, robot_feats)  # (B, k, d_model)


class MotionDecoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        d = config.d_model
        self.mrhf_proj = nn.Linear(config.mrhf_dim, d)
        self.block = CrossAttentionBlock(d, config.heads)
        self.head = Mlp([d, 2 * d, config.robot_frame_dim])

    def forward(
        self,
        fused: torch.Tensor,  # (B, k, d_model)
        mrhf: torch.Tensor,  # (B, T, mrhf_dim)
        last_frame: torch.Tensor,  # (B, robot_frame_dim)
    ) -> torch.Tensor:
        memory = self.mrhf_proj(mrhf)
        memory = memory + sinusoidal_positions(
            memory.shape[1], memory.shape[2], device=memory.device, dtype=memory.dtype
        )
        h = self.block(fused, memory)
        return last_frame.unsqueeze(1) + self.head(h)  # (B, k, robot_frame_dim)
