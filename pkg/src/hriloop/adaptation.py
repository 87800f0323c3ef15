"""Rating-driven adaptation: classify recorded sessions into positive and
negative examples and fine-tune the motion model on both.

The combined objective weighs a reconstruction term on well-rated sessions
against one on badly-rated sessions. Two modes:

- ``raw``: L_pos - alpha * L_neg, the direct subtraction, optimized under
  global gradient-norm clipping (the term is unbounded below);
- ``margin`` (default): L_pos + alpha * max(0, m - L_neg), which stops
  pushing the negative term once it is m away.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from .data.interhri import HriSample
from .errors import AdaptationError, DataFormatError
from .metrics.report import MetricsReport, evaluate_model, fit_eval_heads
from .model.command import make_command, Vocabulary
from .model.network import InteractionModel
from .model.training import WindowBatch, extract_windows
from .skeleton import MotionSequence, SkeletonSpec
from .surface import affordance_ground_truth, build_binding, sample_body_surface

log = logging.getLogger(__name__)

RATING_MIN, RATING_MAX = 1, 5


@dataclass(frozen=True)
class InteractionRecord:
    """One recorded session: what the human did, what the robot executed,
    the command, and the user's verdict."""

    session_id: str
    human_seq: MotionSequence
    robot_seq: MotionSequence
    command_text: str
    rating: int | None = None
    note: str | None = None
    started_at: float = 0.0
    ended_at: float = 0.0

    def __post_init__(self):
        if self.rating is not None and not (RATING_MIN <= self.rating <= RATING_MAX):
            raise DataFormatError(f"rating {self.rating} outside {RATING_MIN}..{RATING_MAX}")
        if len(self.human_seq) != len(self.robot_seq):
            raise DataFormatError("record sequences must be time-aligned")


@dataclass
class AdaptationConfig:
    alpha: float = 0.1
    positive_threshold: int = 4
    negative_threshold: int = 2
    mode: str = "margin"  # "raw" | "margin"
    margin: float | None = None  # None: set to 2x median starting L_pos
    lr: float = 5e-4
    steps: int = 300
    batch_size: int = 8
    sample_budget: int | None = None  # total records used (half pos, half neg)
    seed: int = 0
    clip_norm: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if not (
            RATING_MIN <= self.negative_threshold
            < self.positive_threshold
            <= RATING_MAX
        ):
            raise ValueError("thresholds must satisfy 1 <= neg < pos <= 5")
        if self.mode not in ("raw", "margin"):
            raise ValueError(f"unknown adaptation mode {self.mode!r}")


def classify_feedback(
    records: list[InteractionRecord], config: AdaptationConfig
) -> tuple[list[InteractionRecord], list[InteractionRecord], list[InteractionRecord]]:
    """Partition rated records into (positive, negative, unlabeled)."""
    positive, negative, unlabeled = [], [], []
    for r in records:
        if r.rating is None:
            unlabeled.append(r)
        elif r.rating >= config.positive_threshold:
            positive.append(r)
        elif r.rating <= config.negative_threshold:
            negative.append(r)
        else:
            unlabeled.append(r)
    return positive, negative, unlabeled


def combine_adaptation_losses(
    l_pos: torch.Tensor, l_neg: torch.Tensor | None, config: AdaptationConfig
) -> torch.Tensor:
    """The scalar objective; with no negatives it degrades to L_pos."""
    if l_neg is None:
        return l_pos
    if config.mode == "raw":
        return l_pos - config.alpha * l_neg
    margin = config.margin if config.margin is not None else 1.0
    return l_pos + config.alpha * torch.clamp(margin - l_neg, min=0.0)


def _record_to_sample(
    record: InteractionRecord,
    binding,
    human_spec: SkeletonSpec,
    robot_spec: SkeletonSpec,
    vocab: Vocabulary,
) -> HriSample:
    surfaces = tuple(
        sample_body_surface(f, human_spec, binding.vertex_count, binding=binding)
        for f in record.human_seq.frames
    )
    aff = affordance_ground_truth(
        list(surfaces), list(record.robot_seq.frames), robot_spec
    )
    return HriSample(
        sample_id=record.session_id,
        human_seq=record.human_seq,
        surfaces=surfaces,
        robot_seq=record.robot_seq,
        robot_poses=tuple(),
        affordance=aff,
        command=make_command(record.command_text, vocab),
        robot_type=robot_spec.name,
        split="train",
        negative=False,
    )


def records_to_windows(
    records: list[InteractionRecord],
    model: InteractionModel,
    human_spec: SkeletonSpec,
    robot_spec: SkeletonSpec,
) -> WindowBatch:
    binding = build_binding(human_spec, model.config.vertex_count)
    samples = [
        _record_to_sample(r, binding, human_spec, robot_spec, model.vocab)
        for r in records
    ]
    windows, _ = extract_windows(samples, model.config, model.vocab)
    return windows


def _motion_mse(model: InteractionModel, batch: WindowBatch, idx: np.ndarray) -> torch.Tensor:
    dtype = next(model.parameters()).dtype
    human, verts, robot, cmd_ids, target_motion, _ = batch.select(idx).to_tensors(dtype)
    motion, _ = model(human, verts, robot, cmd_ids)
    return torch.mean((motion - target_motion) ** 2)


def adaptation_loss(
    model: InteractionModel,
    positive: WindowBatch,
    negative: WindowBatch | None,
    config: AdaptationConfig,
    positive_idx: np.ndarray | None = None,
    negative_idx: np.ndarray | None = None,
) -> torch.Tensor:
    """Combined objective on (a batch of) positive and negative windows."""
    if positive is None or len(positive) == 0:
        raise AdaptationError("adaptation needs at least one positive sample")
    pi = positive_idx if positive_idx is not None else np.arange(len(positive))
    l_pos = _motion_mse(model, positive, pi)
    l_neg = None
    if negative is not None and len(negative) > 0:
        ni = negative_idx if negative_idx is not None else np.arange(len(negative))
        l_neg = _motion_mse(model, negative, ni)
    return combine_adaptation_losses(l_pos, l_neg, config)


@dataclass
class FinetuneResult:
    model: InteractionModel
    before: MetricsReport
    after: MetricsReport
    used_positive: int = 0
    used_negative: int = 0
    losses: list[float] = field(default_factory=list)


def _balance(pos: list, neg: list, rng: np.random.Generator) -> tuple[list, list]:
    n = min(len(pos), len(neg))
    if len(pos) > n:
        keep = rng.choice(len(pos), size=n, replace=False)
        pos = [pos[int(i)] for i in sorted(keep)]
    if len(neg) > n:
        keep = rng.choice(len(neg), size=n, replace=False)
        neg = [neg[int(i)] for i in sorted(keep)]
    return pos, neg


def finetune(
    model: InteractionModel,
    records: list[InteractionRecord],
    config: AdaptationConfig,
    heldout: list[HriSample],
    robot_spec: SkeletonSpec,
    human_spec: SkeletonSpec,
    heads=None,
) -> FinetuneResult:
    """Fine-tune a copy of the model on rated records; the base model object
    is never touched. Positive and negative sets are balanced 1:1 by
    subsampling the larger; emits held-out metric reports before and after.
    """
    from .model.layers import use_single_thread

    use_single_thread()
    rng = np.random.default_rng(config.seed)
    positive, negative, _ = classify_feedback(records, config)
    if not positive:
        raise AdaptationError("no positive records; cannot fine-tune")
    positive, negative = _balance(positive, negative, rng)
    if config.sample_budget is not None:
        half = max(config.sample_budget // 2, 1)
        positive = positive[:half]
        negative = negative[:half]

    if heads is None:
        heads = fit_eval_heads(heldout, robot_spec, seed=config.seed)
    before = evaluate_model(model, heldout, robot_spec, seed=config.seed, heads=heads)

    tuned = copy.deepcopy(model)
    pos_windows = records_to_windows(positive, tuned, human_spec, robot_spec)
    neg_windows = (
        records_to_windows(negative, tuned, human_spec, robot_spec)
        if negative
        else None
    )

    cfg = config
    if cfg.mode == "margin" and cfg.margin is None:
        with torch.no_grad():
            start_pos = float(_motion_mse(tuned, pos_windows, np.arange(len(pos_windows))))
        cfg = replace(cfg, margin=2.0 * start_pos)

    torch.manual_seed(cfg.seed)
    opt = torch.optim.Adam(tuned.parameters(), lr=cfg.lr)
    tuned.train()
    losses = []
    for _ in range(cfg.steps):
        pi = rng.choice(len(pos_windows), size=min(cfg.batch_size, len(pos_windows)), replace=False)
        ni = None
        if neg_windows is not None:
            ni = rng.choice(
                len(neg_windows), size=min(cfg.batch_size, len(neg_windows)), replace=False
            )
        opt.zero_grad()
        loss = adaptation_loss(tuned, pos_windows, neg_windows, cfg, pi, ni)
        loss.backward()
        if cfg.mode == "raw":
            torch.nn.utils.clip_grad_norm_(tuned.parameters(), cfg.clip_norm)
        opt.step()
        losses.append(float(loss.detach()))
    tuned.eval()

    after = evaluate_model(tuned, heldout, robot_spec, seed=cfg.seed, heads=heads)
    return FinetuneResult(
        model=tuned,
        before=before,
        after=after,
        used_positive=len(positive),
        used_negative=len(negative),
        losses=losses,
    )


def records_from_samples(
    samples: list[HriSample], rating: int, session_prefix: str = "sess"
) -> list[InteractionRecord]:
    """Wrap benchmark samples as rated session records (e.g. oracle targets
    as well-rated sessions, manufactured negatives as badly-rated ones)."""
    out = []
    for i, s in enumerate(samples):
        out.append(
            InteractionRecord(
                session_id=f"{session_prefix}-{s.sample_id}-{i}",
                human_seq=s.human_seq,
                robot_seq=s.robot_seq,
                command_text=s.command.text,
                rating=rating,
            )
        )
    return out


# -- session file I/O ---------------------------------------------------------


def load_records(
    sessions_dir: str | Path,
    human_spec: SkeletonSpec,
    robot_spec: SkeletonSpec,
) -> list[InteractionRecord]:
    """Read every session file under a directory into records.

    When a session carries several feedback lines (append-only store), the
    most recent rating wins; notes are concatenated.
    """
    from .service.sessions import read_session_record

    sessions_dir = Path(sessions_dir)
    records = []
    for path in sorted(sessions_dir.glob("*.jsonl")):
        try:
            rec = read_session_record(path, human_spec, robot_spec)
        except DataFormatError as e:
            log.warning("skipping unreadable session %s: %s", path.name, e)
            continue
        if rec is not None:
            records.append(rec)
    return records


def config_hash(config: AdaptationConfig) -> str:
    payload = json.dumps(config.__dict__, sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


def write_lineage(
    checkpoint_path: str | Path,
    base_checkpoint: str | Path,
    config: AdaptationConfig,
    sessions_dir: str | Path | None,
) -> Path:
    """Record where a fine-tuned checkpoint came from."""
    base = Path(base_checkpoint)
    digest = hashlib.sha256(base.read_bytes()).hexdigest()[:16] if base.exists() else None
    manifest = {
        "checkpoint": str(checkpoint_path),
        "base_checkpoint": str(base_checkpoint),
        "base_sha256_16": digest,
        "finetuned_by": str(sessions_dir) if sessions_dir else None,
        "config_hash": config_hash(config),
        "created_at": time.time(),
    }
    out = Path(str(checkpoint_path) + ".lineage.json")
    out.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return out
