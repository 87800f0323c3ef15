"""Command-to-motion retrieval accuracy.

A jointly trained embedder maps command texts and motion sequences into one
space (contrastively, matched pairs pulled together). The score ranks each
motion's true command against a pool of distractor commands by Euclidean
distance and reports the top-3 hit rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import torch
from torch import nn

from ..model.command import Vocabulary
from ..skeleton import MotionSequence
from .fid import _sequence_matrix

TOP_K = 3
DEFAULT_POOL = 32


@dataclass
class EmbedderConfig:
    joint_count: int
    fixed_frames: int = 24
    embed_dim: int = 16
    hidden: int = 64
    lr: float = 2e-3
    steps: int = 300
    temperature: float = 0.5
    seed: int = 0


class JointEmbedder(nn.Module):
    """Shared embedding space for command texts and motions."""

    def __init__(self, vocab: Vocabulary, config: EmbedderConfig):
        super().__init__()
        self.config = config
        self.vocab = vocab
        torch.manual_seed(config.seed)
        self.text_table = nn.Embedding(len(vocab), config.embed_dim)
        in_dim = config.fixed_frames * config.joint_count * 3
        self.motion_net = nn.Sequential(
            nn.Linear(in_dim, config.hidden),
            nn.GELU(),
            nn.Linear(config.hidden, config.embed_dim),
        )
        self.eval()

    def embed_text(self, text: str) -> np.ndarray:
        idx = self.vocab.id_of(text)
        if idx < 0:
            raise KeyError(f"{text!r} not in embedder vocabulary")
        with torch.no_grad():
            return self.text_table.weight[idx].double().numpy()

    def embed_motion(self, seq: MotionSequence) -> np.ndarray:
        mat = _sequence_matrix(seq, self.config.fixed_frames).astype(np.float32)
        with torch.no_grad():
            return self.motion_net(torch.from_numpy(mat)).double().numpy()


def train_joint_embedder(
    pairs: list[tuple[str, MotionSequence]],
    vocab: Vocabulary,
    config: EmbedderConfig,
) -> tuple[JointEmbedder, list[float]]:
    """Contrastive fit: within a batch, each motion should be closest to its
    own command embedding."""
    from ..model.layers import use_single_thread

    use_single_thread()
    model = JointEmbedder(vocab, config)
    ids = torch.tensor([vocab.id_of(t) for t, _ in pairs], dtype=torch.long)
    mats = torch.from_numpy(
        np.stack(
            [_sequence_matrix(s, config.fixed_frames) for _, s in pairs]
        ).astype(np.float32)
    )
    torch.manual_seed(config.seed + 1)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    losses = []
    model.train()
    for _ in range(config.steps):
        opt.zero_grad()
        m = model.motion_net(mats)  # (N, d)
        t = model.text_table(ids)  # (N, d)
        d2 = torch.cdist(m, model.text_table.weight) ** 2  # (N, vocab)
        logits = -d2 / config.temperature
        loss = nn.functional.cross_entropy(logits, ids)
        # keep matched pairs tight even when several samples share a command
        loss = loss + 0.1 * torch.mean(torch.sum((m - t) ** 2, dim=1))
        loss.backward()
        opt.step()
        losses.append(float(loss.detach()))
    model.eval()
    return model, losses


def r_score(
    samples: list[tuple[str, MotionSequence]],
    text_emb: Callable[[str], np.ndarray],
    motion_emb: Callable[[MotionSequence], np.ndarray],
    pool_size: int = DEFAULT_POOL,
    seed: int = 0,
) -> float:
    """Top-3 retrieval accuracy of the true command within a distractor pool.

    Distractors are drawn (without replacement) from the other distinct
    command texts; if fewer than pool_size - 1 exist, the pool shrinks to
    what is available.
    """
    if not samples:
        return 0.0
    rng = np.random.default_rng(seed)
    unique_texts = sorted({t for t, _ in samples})
    text_vectors = {t: np.asarray(text_emb(t), dtype=np.float64) for t in unique_texts}
    hits = 0
    for text, seq in samples:
        others = [t for t in unique_texts if t != text]
        n_distract = min(pool_size - 1, len(others))
        chosen = rng.choice(len(others), size=n_distract, replace=False)
        pool = [text] + [others[int(i)] for i in chosen]
        m = np.asarray(motion_emb(seq), dtype=np.float64)
        dists = np.array([np.linalg.norm(m - text_vectors[t]) for t in pool])
        rank = int(np.argsort(dists, kind="stable").tolist().index(0))
        if rank < TOP_K:
            hits += 1
    return hits / len(samples)
