"""Supervised training of the reactive motion model.

Each training window pairs history (human joints, surface vertices, robot
frames) with the next `horizon` robot frames and the exact distance-field
targets. The loss is motion MSE plus a weighted distance-field MSE.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
import torch

from ..errors import AdaptationError, VocabularyError

if TYPE_CHECKING:
    from ..data.interhri import HriSample
from .config import ModelConfig
from .network import InteractionModel, frames_to_array, human_window_array, surfaces_to_array

log = logging.getLogger(__name__)


@dataclass
class WindowBatch:
    """Stacked training windows (all float32)."""

    human: np.ndarray  # (N, T, J_H*3)
    verts: np.ndarray  # (N, T, V, 3)
    robot: np.ndarray  # (N, T, frame_dim)
    cmd_ids: np.ndarray  # (N,)
    target_motion: np.ndarray  # (N, k, frame_dim)
    target_aff: np.ndarray  # (N, k, E, V)

    def __len__(self) -> int:
        return self.human.shape[0]

    def select(self, idx: np.ndarray) -> "WindowBatch":
        return WindowBatch(
            self.human[idx],
            self.verts[idx],
            self.robot[idx],
            self.cmd_ids[idx],
            self.target_motion[idx],
            self.target_aff[idx],
        )

    def to_tensors(self, dtype=torch.float32):
        return (
            torch.from_numpy(self.human).to(dtype),
            torch.from_numpy(self.verts).to(dtype),
            torch.from_numpy(self.robot).to(dtype),
            torch.from_numpy(self.cmd_ids),
            torch.from_numpy(self.target_motion).to(dtype),
            torch.from_numpy(self.target_aff).to(dtype),
        )


def extract_windows(
    samples: "list[HriSample]",
    config: ModelConfig,
    vocab,
    stride: int = 1,
    max_windows_per_sample: int | None = None,
) -> tuple[WindowBatch, int]:
    """Slice every sample into (history, future) windows.

    Sequences shorter than history+1+horizon are skipped and counted.
    """
    t_in, k = config.window, config.horizon
    need = t_in + k
    rows: list[tuple] = []
    skipped = 0
    for s in samples:
        if s.frame_count < need:
            skipped += 1
            continue
        cmd_id = vocab.id_of(s.command.text)
        if cmd_id < 0:
            raise VocabularyError(
                f"sample {s.sample_id}: command {s.command.text!r} not in vocabulary"
            )
        human = human_window_array(s.human_seq.frames)
        verts = surfaces_to_array(s.surfaces)
        robot = frames_to_array(s.robot_seq.frames)
        aff = s.affordance.distances
        starts = range(0, s.frame_count - need + 1, stride)
        if max_windows_per_sample is not None:
            starts = list(starts)[:max_windows_per_sample]
        for st in starts:
            rows.append(
                (
                    human[st : st + t_in],
                    verts[st : st + t_in],
                    robot[st : st + t_in],
                    cmd_id,
                    robot[st + t_in : st + need],
                    aff[st + t_in : st + need],
                )
            )
    if skipped:
        log.warning("%d sequences shorter than %d frames were skipped", skipped, need)
    if not rows:
        raise AdaptationError("no training windows could be extracted")
    batch = WindowBatch(
        human=np.stack([r[0] for r in rows]).astype(np.float32),
        verts=np.stack([r[1] for r in rows]).astype(np.float32),
        robot=np.stack([r[2] for r in rows]).astype(np.float32),
        cmd_ids=np.array([r[3] for r in rows], dtype=np.int64),
        target_motion=np.stack([r[4] for r in rows]).astype(np.float32),
        target_aff=np.stack([r[5] for r in rows]).astype(np.float32),
    )
    return batch, skipped


def training_losses(
    model: InteractionModel, tensors
) -> tuple[torch.Tensor, torch.Tensor]:
    """(motion MSE, affordance MSE) for a tensor batch."""
    human, verts, robot, cmd_ids, target_motion, target_aff = tensors
    motion, aff = model(human, verts, robot, cmd_ids)
    motion_mse = torch.mean((motion - target_motion) ** 2)
    aff_mse = torch.mean((aff - target_aff) ** 2)
    return motion_mse, aff_mse


@dataclass
class TrainResult:
    curves: dict[str, list[float]] = field(
        default_factory=lambda: {"total": [], "motion": [], "affordance": []}
    )
    skipped: int = 0
    steps: int = 0


def train(
    model: InteractionModel,
    samples: "list[HriSample]",
    config: ModelConfig | None = None,
    stride: int = 1,
) -> tuple[InteractionModel, TrainResult]:
    """Train in place for config.train_steps optimizer steps.

    Deterministic for a fixed config seed. Loss curves are recorded per
    epoch (one shuffled pass over all windows).
    """
    from .layers import use_single_thread

    use_single_thread()
    config = config or model.config
    windows, skipped = extract_windows(samples, config, model.vocab, stride=stride)
    result = TrainResult(skipped=skipped)
    if config.train_steps == 0:
        return model, result
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    model.train()
    steps = 0
    while steps < config.train_steps:
        order = rng.permutation(len(windows))
        epoch_tot, epoch_mot, epoch_aff, batches = 0.0, 0.0, 0.0, 0
        for i in range(0, len(order), config.batch_size):
            if steps >= config.train_steps:
                break
            idx = order[i : i + config.batch_size]
            tensors = windows.select(idx).to_tensors()
            opt.zero_grad()
            motion_mse, aff_mse = training_losses(model, tensors)
            loss = motion_mse + config.lambda_aff * aff_mse
            loss.backward()
            opt.step()
            steps += 1
            batches += 1
            epoch_tot += float(loss.detach())
            epoch_mot += float(motion_mse.detach())
            epoch_aff += float(aff_mse.detach())
        if batches:
            result.curves["total"].append(epoch_tot / batches)
            result.curves["motion"].append(epoch_mot / batches)
            result.curves["affordance"].append(epoch_aff / batches)
    model.eval()
    result.steps = steps
    return model, result
