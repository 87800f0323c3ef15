"""Distribution distance between motion sets.

A small motion autoencoder trained on ground-truth robot sequences supplies
the fixed-dimensional features; the score is the Gaussian Frechet distance
between the feature clouds of two motion sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..skeleton import MotionSequence


@dataclass
class ExtractorConfig:
    joint_count: int
    fixed_frames: int = 24
    feature_dim: int = 16
    hidden: int = 64
    lr: float = 1e-3
    steps: int = 400
    seed: int = 0


def _sequence_matrix(seq: MotionSequence, fixed_frames: int) -> np.ndarray:
    """Root-relative positions, linearly resampled to a fixed frame count."""
    pos = seq.positions()  # (T, J, 3)
    pos = pos - pos[0, 0]  # anchor at the starting root joint
    t = pos.shape[0]
    src = np.linspace(0.0, 1.0, t)
    dst = np.linspace(0.0, 1.0, fixed_frames)
    flat = pos.reshape(t, -1)
    out = np.empty((fixed_frames, flat.shape[1]))
    for c in range(flat.shape[1]):
        out[:, c] = np.interp(dst, src, flat[:, c])
    return out.reshape(-1)


class MotionFeatureExtractor(nn.Module):
    """Autoencoder over fixed-length motion windows; the bottleneck is the
    feature."""

    def __init__(self, config: ExtractorConfig):
        super().__init__()
        self.config = config
        torch.manual_seed(config.seed)
        in_dim = config.fixed_frames * config.joint_count * 3
        self.encoder = nn.Sequential(
            nn.Linear(in_dim, config.hidden),
            nn.GELU(),
            nn.Linear(config.hidden, config.feature_dim),
        )
        self.decoder = nn.Sequential(
            nn.Linear(config.feature_dim, config.hidden),
            nn.GELU(),
            nn.Linear(config.hidden, in_dim),
        )
        self.eval()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.decoder(self.encoder(x))

    def features(self, sequences: list[MotionSequence]) -> np.ndarray:
        mats = np.stack(
            [_sequence_matrix(s, self.config.fixed_frames) for s in sequences]
        ).astype(np.float32)
        with torch.no_grad():
            return self.encoder(torch.from_numpy(mats)).double().numpy()


def train_feature_extractor(
    sequences: list[MotionSequence], config: ExtractorConfig
) -> tuple[MotionFeatureExtractor, list[float]]:
    """Fit the autoencoder on ground-truth sequences; deterministic per seed."""
    from ..model.layers import use_single_thread

    use_single_thread()
    model = MotionFeatureExtractor(config)
    mats = np.stack(
        [_sequence_matrix(s, config.fixed_frames) for s in sequences]
    ).astype(np.float32)
    x = torch.from_numpy(mats)
    torch.manual_seed(config.seed + 1)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    losses = []
    model.train()
    for _ in range(config.steps):
        opt.zero_grad()
        loss = torch.mean((model(x) - x) ** 2)
        loss.backward()
        opt.step()
        losses.append(float(loss.detach()))
    model.eval()
    return model, losses


def _psd_sqrt_trace(s: np.ndarray, clip: float = -1e-8) -> float:
    """Trace of the PSD square root via eigendecomposition; eigenvalues in
    [clip, 0) are clipped to zero, anything below raises."""
    eig = np.linalg.eigvalsh((s + s.T) / 2.0)
    if np.any(eig < clip):
        raise ValueError(f"matrix is not PSD within tolerance: min eig {eig.min()}")
    return float(np.sum(np.sqrt(np.clip(eig, 0.0, None))))


def fid(features_a: np.ndarray, features_b: np.ndarray) -> float:
    """Frechet distance between Gaussian fits of two feature sets."""
    a = np.asarray(features_a, dtype=np.float64)
    b = np.asarray(features_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("feature sets must be (N, d) with a common d")
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.cov(a, rowvar=False)
    cov_b = np.cov(b, rowvar=False)
    cov_a = np.atleast_2d(cov_a)
    cov_b = np.atleast_2d(cov_b)

    # tr((cov_a cov_b)^{1/2}) via the symmetric sandwich form.
    eig_a, vec_a = np.linalg.eigh((cov_a + cov_a.T) / 2.0)
    root_a = vec_a @ np.diag(np.sqrt(np.clip(eig_a, 0.0, None))) @ vec_a.T
    cross = _psd_sqrt_trace(root_a @ cov_b @ root_a)

    mean_term = float(np.sum((mu_a - mu_b) ** 2))
    return mean_term + float(np.trace(cov_a) + np.trace(cov_b)) - 2.0 * cross
