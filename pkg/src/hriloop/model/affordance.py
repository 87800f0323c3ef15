"""Dense hand-to-surface distance field prediction.

A shared per-vertex MLP with a max-pooled global context makes the vertex
features permutation-equivariant. History tokens (pooled vertex features +
embedded robot joints) feed a transformer encoder; future-step queries read
it through one cross-attention branch for motion cues and a second branch
over the command embedding for semantic cues; a small MLP head decodes a
nonnegative distance per (future step, end effector, vertex) via softplus.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from .config import ModelConfig
from .layers import Mlp, encoder_stack, sinusoidal_positions


class VertexEncoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        d = config.d_vertex
        self.point_mlp = Mlp([3, d, d])
        self.global_proj = nn.Linear(d, d)
        self.merge = nn.Linear(2 * d, d)

    def forward(self, verts: torch.Tensor) -> torch.Tensor:
        """(B, T, V, 3) -> per-vertex features (B, T, V, d_vertex)."""
        point = self.point_mlp(verts)
        pooled = self.global_proj(point.max(dim=2).values)  # (B, T, d)
        pooled = pooled.unsqueeze(2).expand_as(point)
        return self.merge(torch.cat([point, pooled], dim=-1))


class AffordancePredictor(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        d = config.d_model
        self.vertex_encoder = VertexEncoder(config)
        self.robot_proj = nn.Linear(config.robot_frame_dim, d)
        self.token_proj = nn.Linear(config.d_vertex + d, d)
        self.encoder = encoder_stack(d, config.heads, config.encoder_layers)
        self.query = nn.Parameter(torch.randn(config.horizon, d) * 0.02)
        self.cross_motion = nn.MultiheadAttention(d, config.heads, batch_first=True)
        self.cross_semantic = nn.MultiheadAttention(d, config.heads, batch_first=True)
        self.cmd_proj = nn.Linear(config.command_dim, d)
        self.norm_q = nn.LayerNorm(d)
        self.ffn = Mlp([d, 2 * d, d])
        n_eff = len(config.effector_indices)
        self.head = Mlp([d + config.d_vertex, d, n_eff])
        self.hand_head = Mlp([d, d, n_eff * 3])
        self.vertex_shift_head = Mlp([d + config.d_vertex, d, 3])
        # zero-init the final layers: training starts from the clean
        # persistence anchor instead of fighting random refinements
        for mlp in (self.head, self.hand_head, self.vertex_shift_head):
            last = mlp.net[-1]
            nn.init.zeros_(last.weight)
            nn.init.zeros_(last.bias)

    def encode_vertices(self, verts: torch.Tensor) -> torch.Tensor:
        return self.vertex_encoder(verts)

    def forward(
        self,
        vertex_feats: torch.Tensor,  # (B, T, V, d_vertex)
        robot_hist: torch.Tensor,  # (B, T, robot_frame_dim)
        cmd: torch.Tensor,  # (B, command_dim)
        geometry: tuple[torch.Tensor, torch.Tensor, torch.Tensor] | None = None,
    ) -> torch.Tensor:
        """geometry = (last hand positions (B, E, 3), last raw vertices
        (B, V, 3), per-frame vertex velocity (B, V, 3)). When provided, the
        distances are anchored on explicitly predicted future geometry: a
        hand-trajectory head plus velocity-extrapolated vertices; the MLP
        head then only refines."""
        b, t, v, _ = vertex_feats.shape
        pooled = vertex_feats.max(dim=2).values  # (B, T, d_vertex)
        tokens = self.token_proj(torch.cat([pooled, self.robot_proj(robot_hist)], -1))
        tokens = tokens + sinusoidal_positions(
            t, tokens.shape[-1], device=tokens.device, dtype=tokens.dtype
        )
        memory = self.encoder(tokens)

        q = self.query.unsqueeze(0).expand(b, -1, -1).to(memory.dtype)
        cmd_tok = self.cmd_proj(cmd).unsqueeze(1)  # (B, 1, d)
        motion_cue = self.cross_motion(q, memory, memory, need_weights=False)[0]
        semantic_cue = self.cross_semantic(q, cmd_tok, cmd_tok, need_weights=False)[0]
        h = self.norm_q(q + motion_cue + semantic_cue)
        h = h + self.ffn(h)  # (B, k, d)

        last_verts = vertex_feats[:, -1]  # (B, V, d_vertex)
        k = h.shape[1]
        pair = torch.cat(
            [
                h.unsqueeze(2).expand(b, k, v, h.shape[-1]),
                last_verts.unsqueeze(1).expand(b, k, v, last_verts.shape[-1]),
            ],
            dim=-1,
        )
        raw = self.head(pair).permute(0, 1, 3, 2)  # (B, k, E, V)
        if geometry is not None:
            last_hands, verts_raw, _vert_vel = geometry
            e = last_hands.shape[1]
            hand_delta = self.hand_head(h).reshape(b, k, e, 3)
            hands_pred = last_hands.unsqueeze(1) + hand_delta  # (B, k, E, 3)
            vert_shift = self.vertex_shift_head(pair)  # (B, k, V, 3) per vertex
            verts_pred = verts_raw.unsqueeze(1) + vert_shift
            anchor_dist = torch.linalg.norm(
                hands_pred.unsqueeze(3) - verts_pred.unsqueeze(2), dim=-1
            )  # (B, k, E, V)
            raw = raw + torch.log(torch.expm1(anchor_dist.clamp(min=1e-3)))
        else:
            raw = raw + 1.0
        return F.softplus(raw)  # (B, k, E, V)
