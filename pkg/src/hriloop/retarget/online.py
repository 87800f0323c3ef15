"""Learned skeleton-positions-to-joint-angles retargeter for live serving.

A per-frame transformer mixes information across joints, a bidirectional GRU
runs along time per joint, and a linear head emits angle-axis parameters.
Training labels come from the kinematic oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from ..errors import RetargetError
from ..rotations import angle_axis_to_matrix, canonicalize_angle_axis
from ..skeleton import MotionSequence, PoseParams
from ..rotations import quat_apply, quat_conjugate


@dataclass
class RetargeterConfig:
    joint_count: int
    d_model: int = 48
    heads: int = 4
    spatial_layers: int = 1
    gru_hidden: int = 48
    lr: float = 2e-3
    steps: int = 1500
    seed: int = 0
    log_every: int = 100


class OnlineRetargeter(nn.Module):
    def __init__(self, config: RetargeterConfig):
        super().__init__()
        self.config = config
        torch.manual_seed(config.seed)
        d = config.d_model
        self.in_proj = nn.Linear(3, d)
        self.joint_embed = nn.Parameter(torch.randn(config.joint_count, d) * 0.02)
        layer = nn.TransformerEncoderLayer(
            d, config.heads, dim_feedforward=2 * d, batch_first=True,
            dropout=0.0, activation="gelu",
        )
        self.spatial = nn.TransformerEncoder(layer, config.spatial_layers)
        self.gru = nn.GRU(
            d, config.gru_hidden, batch_first=True, bidirectional=True
        )
        self.head = nn.Linear(2 * config.gru_hidden, 3)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, F, J, 3) root-local joint positions -> (B, F, J, 3) angle-axis."""
        b, f, j, _ = x.shape
        tokens = self.in_proj(x) + self.joint_embed  # (B, F, J, d)
        tokens = self.spatial(tokens.reshape(b * f, j, -1)).reshape(b, f, j, -1)
        per_joint = tokens.permute(0, 2, 1, 3).reshape(b * j, f, -1)
        temporal, _ = self.gru(per_joint)
        angles = self.head(temporal).reshape(b, j, f, 3).permute(0, 2, 1, 3)
        return angles


def _root_local_positions(seq: MotionSequence) -> np.ndarray:
    out = np.empty((len(seq), seq.skeleton.joint_count, 3))
    for t, frame in enumerate(seq.frames):
        inv = quat_conjugate(frame.root.rotation)
        out[t] = quat_apply(inv, frame.joint_positions - frame.root.translation)
    return out


def online_retarget(
    window: MotionSequence, model: OnlineRetargeter
) -> tuple[list[PoseParams], dict]:
    """Predict per-frame pose angles for a window of robot skeleton frames.

    Needs at least 3 frames of bidirectional context. Returns canonicalized
    angle-axis poses plus a diagnostics dict with the mean frame-to-frame
    angle delta in degrees.
    """
    if len(window) < 3:
        raise RetargetError(f"retarget window needs >= 3 frames, got {len(window)}")
    if window.skeleton.joint_count != model.config.joint_count:
        raise RetargetError("window skeleton does not match retargeter")
    local = _root_local_positions(window)
    with torch.no_grad():
        pred = model(torch.from_numpy(local).float().unsqueeze(0))[0].numpy()
    poses = []
    for t, frame in enumerate(window.frames):
        angles = np.stack([canonicalize_angle_axis(v) for v in pred[t]])
        poses.append(PoseParams(angles, frame.root))
    deltas = []
    for a, b in zip(poses, poses[1:]):
        deltas.append(_mean_geodesic_deg(a.angles, b.angles))
    return poses, {"mean_frame_delta_deg": float(np.mean(deltas)) if deltas else 0.0}


def _mean_geodesic_deg(a: np.ndarray, b: np.ndarray) -> float:
    total = 0.0
    for va, vb in zip(a, b):
        rel = angle_axis_to_matrix(va).T @ angle_axis_to_matrix(vb)
        cos = np.clip((np.trace(rel) - 1.0) / 2.0, -1.0, 1.0)
        total += np.degrees(np.arccos(cos))
    return total / a.shape[0]


def mean_angle_error_deg(
    pred: list[PoseParams], label: list[PoseParams]
) -> float:
    """Mean per-joint geodesic rotation error, degrees."""
    return float(
        np.mean([_mean_geodesic_deg(p.angles, l.angles) for p, l in zip(pred, label)])
    )


@dataclass
class RetargeterTrainStats:
    losses: list[float] = field(default_factory=list)


def train_retargeter(
    model: OnlineRetargeter,
    labeled: list[tuple[MotionSequence, tuple[PoseParams, ...]]],
    config: RetargeterConfig | None = None,
) -> tuple[OnlineRetargeter, RetargeterTrainStats]:
    """Fit the retargeter to oracle-labeled (sequence, poses) pairs with MSE
    on angle-axis targets. Deterministic for a fixed config seed; zero steps
    returns the model untouched."""
    from ..model.layers import use_single_thread

    use_single_thread()
    config = config or model.config
    stats = RetargeterTrainStats()
    if config.steps == 0:
        return model, stats
    torch.manual_seed(config.seed + 1)
    inputs = [
        torch.from_numpy(_root_local_positions(seq)).float().unsqueeze(0)
        for seq, _ in labeled
    ]
    targets = [
        torch.from_numpy(np.stack([p.angles for p in poses])).float().unsqueeze(0)
        for _, poses in labeled
    ]
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    model.train()
    for step in range(config.steps):
        i = step % len(labeled)
        opt.zero_grad()
        pred = model(inputs[i])
        loss = torch.mean((pred - targets[i]) ** 2)
        loss.backward()
        opt.step()
        stats.losses.append(float(loss.detach()))
    model.eval()
    return model, stats
