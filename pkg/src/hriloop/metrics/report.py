"""Aggregated evaluation: drive the model over benchmark samples with the
receding-horizon loop and score every metric against the targets."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..data.interhri import HriSample
from ..model.command import Vocabulary, make_command
from ..model.network import InteractionModel, run_session
from ..skeleton import MotionSequence, SkeletonSpec
from .core import (
    DEFAULT_CONTACT_TAU,
    contact_from_labels,
    contact_labels,
    mpjpe,
    orie_error,
    pa_mpjpe_frames,
    traj_error,
)
from .fid import ExtractorConfig, MotionFeatureExtractor, fid, train_feature_extractor
from .rscore import EmbedderConfig, JointEmbedder, r_score, train_joint_embedder

TABLE_COLUMNS = (
    "pa_mpjpe",
    "mpjpe",
    "traj",
    "orie",
    "c_prec",
    "c_rec",
    "c_acc",
    "c_f1",
    "fid",
    "r_score",
)


@dataclass
class MetricsReport:
    pa_mpjpe: float
    mpjpe: float
    traj: float
    orie: float
    c_prec: float
    c_rec: float
    c_acc: float
    c_f1: float
    fid: float
    r_score: float
    sample_count: int
    frame_count: int
    skipped_frames: int
    contact_tau: float = DEFAULT_CONTACT_TAU
    degenerate_contact: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("c_prec", "c_rec", "c_acc", "c_f1"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.fid < -1e-6:
            raise ValueError(f"fid={self.fid} below 0")
        if not (0.0 <= self.r_score <= 1.0):
            raise ValueError(f"r_score={self.r_score} outside [0, 1]")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def table_row(self) -> str:
        vals = [getattr(self, c) for c in TABLE_COLUMNS]
        return " ".join(f"{v:>9.4f}" for v in vals)

    @staticmethod
    def table_header() -> str:
        names = (
            "PA-MPJPE",
            "MPJPE",
            "Traj",
            "Orie",
            "C_prec",
            "C_rec",
            "C_acc",
            "C_F1",
            "FID",
            "R-score",
        )
        return " ".join(f"{n:>9s}" for n in names)


def rollout_predictions(
    model: InteractionModel, samples: list[HriSample], robot_spec: SkeletonSpec
) -> list[MotionSequence]:
    """Closed-loop executed trajectories, one frame per human frame.

    Each rollout starts from the target sequence's first frame: that is the
    robot's actual pose when the interaction begins, so the warm-up history
    matches the training distribution instead of teleporting the robot to
    the world origin."""
    preds = []
    for s in samples:
        cmd = make_command(s.command.text, model.vocab)
        preds.append(
            run_session(
                model,
                list(s.human_seq.frames),
                list(s.surfaces),
                cmd,
                s.robot_seq.frames[0],
                robot_spec,
            )
        )
    return preds


def teacher_forced_predictions(
    model: InteractionModel,
    samples: list[HriSample],
    robot_spec: SkeletonSpec,
    lookahead: int | None = None,
) -> list[MotionSequence]:
    """Fixed-lookahead predictions with ground-truth context.

    The prediction for frame index i is the model's `lookahead`-step-ahead
    horizon frame given the true robot/human history ending at i - lookahead
    (left-padded during warm-up); indices before the first reachable target
    keep the robot's actual pose. Defaults to the full model horizon: deep
    enough that action knowledge matters, yet free of compounding rollout
    drift, and it batches across time.
    """
    import torch

    from ..model.network import (
        frames_to_array,
        human_window_array,
        surfaces_to_array,
        vector_to_frame,
    )

    window = model.config.window
    step = lookahead if lookahead is not None else model.config.horizon
    if not (1 <= step <= model.config.horizon):
        raise ValueError(f"lookahead must be in 1..{model.config.horizon}")
    preds = []
    for s in samples:
        t_total = s.frame_count
        human = human_window_array(s.human_seq.frames)
        verts = surfaces_to_array(s.surfaces)
        robot = frames_to_array(s.robot_seq.frames)
        rows_h, rows_v, rows_r = [], [], []
        for i in range(step, t_total):
            end = i - step + 1  # history covers indices < end
            idx = np.clip(np.arange(end - window, end), 0, t_total - 1)
            rows_h.append(human[idx])
            rows_v.append(verts[idx])
            rows_r.append(robot[idx])
        hh = torch.from_numpy(np.stack(rows_h)).float()
        vv = torch.from_numpy(np.stack(rows_v)).float()
        rr = torch.from_numpy(np.stack(rows_r)).float()
        cmd_id = model.vocab.id_of(s.command.text)
        ids = torch.full((hh.shape[0],), cmd_id, dtype=torch.long)
        with torch.no_grad():
            motion, _ = model(hh, vv, rr, ids)
        at_depth = motion[:, step - 1].double().numpy()
        frames = list(s.robot_seq.frames[:step])
        for row, i in enumerate(range(step, t_total)):
            frames.append(
                vector_to_frame(
                    at_depth[row],
                    model.config.robot_joints,
                    s.human_seq.frames[i].timestamp,
                )
            )
        preds.append(MotionSequence(robot_spec, tuple(frames), s.human_seq.fps))
    return preds


def evaluate_predictions(
    predictions: list[MotionSequence],
    samples: list[HriSample],
    extractor: MotionFeatureExtractor,
    embedder: JointEmbedder,
    tau: float = DEFAULT_CONTACT_TAU,
    rscore_pool: int = 32,
    seed: int = 0,
) -> MetricsReport:
    """Score predicted sequences against sample targets."""
    pa_errors: list[float] = []
    skipped = 0
    mp, tr, orie = [], [], []
    weights = []
    pred_labels, gt_labels = [], []
    for pred, s in zip(predictions, samples):
        gt = s.robot_seq
        errs, sk = pa_mpjpe_frames(pred, gt)
        pa_errors.extend(errs)
        skipped += sk
        mp.append(mpjpe(pred, gt))
        tr.append(traj_error(pred, gt))
        orie.append(orie_error(pred, gt))
        weights.append(len(gt))
        pred_labels.append(contact_labels(pred, list(s.surfaces), tau))
        gt_labels.append(contact_labels(gt, list(s.surfaces), tau))

    weights = np.array(weights, dtype=float)
    contact = contact_from_labels(
        np.concatenate([p.reshape(-1) for p in pred_labels]),
        np.concatenate([g.reshape(-1) for g in gt_labels]),
    )
    fid_value = fid(
        extractor.features([s.robot_seq for s in samples]),
        extractor.features(predictions),
    )
    score = r_score(
        [(s.command.text, pred) for s, pred in zip(samples, predictions)],
        embedder.embed_text,
        embedder.embed_motion,
        pool_size=rscore_pool,
        seed=seed,
    )
    def wmean(values):
        return float(np.average(values, weights=weights)) if len(values) else 0.0

    return MetricsReport(
        pa_mpjpe=float(np.mean(pa_errors)) if pa_errors else 0.0,
        mpjpe=wmean(mp),
        traj=wmean(tr),
        orie=wmean(orie),
        c_prec=contact.precision,
        c_rec=contact.recall,
        c_acc=contact.accuracy,
        c_f1=contact.f1,
        fid=max(fid_value, 0.0),
        r_score=score,
        sample_count=len(samples),
        frame_count=int(weights.sum()),
        skipped_frames=skipped,
        contact_tau=tau,
        degenerate_contact=contact.degenerate,
    )


def fit_eval_heads(
    samples: list[HriSample],
    robot_spec: SkeletonSpec,
    seed: int = 0,
    extractor_steps: int = 400,
    embedder_steps: int = 300,
) -> tuple[MotionFeatureExtractor, JointEmbedder]:
    """Train the feature extractor and the retrieval embedder on the
    ground-truth sequences of an evaluation set."""
    sequences = [s.robot_seq for s in samples]
    extractor, _ = train_feature_extractor(
        sequences,
        ExtractorConfig(
            joint_count=robot_spec.joint_count, seed=seed, steps=extractor_steps
        ),
    )
    vocab = Vocabulary.from_labels([s.command.text for s in samples])
    embedder, _ = train_joint_embedder(
        [(s.command.text, s.robot_seq) for s in samples],
        vocab,
        EmbedderConfig(
            joint_count=robot_spec.joint_count, seed=seed, steps=embedder_steps
        ),
    )
    return extractor, embedder


def evaluate_model(
    model: InteractionModel,
    samples: list[HriSample],
    robot_spec: SkeletonSpec,
    tau: float = DEFAULT_CONTACT_TAU,
    seed: int = 0,
    heads: tuple[MotionFeatureExtractor, JointEmbedder] | None = None,
    protocol: str = "teacher_forced",
) -> MetricsReport:
    """Full evaluation: prediction under the chosen protocol plus every
    metric. `teacher_forced` (default) scores one-step predictions with
    ground-truth context; `closed_loop` scores full receding-horizon
    rollouts, drift included."""
    if heads is None:
        heads = fit_eval_heads(samples, robot_spec, seed=seed)
    extractor, embedder = heads
    if protocol == "teacher_forced":
        predictions = teacher_forced_predictions(model, samples, robot_spec)
    elif protocol == "closed_loop":
        predictions = rollout_predictions(model, samples, robot_spec)
    else:
        raise ValueError(f"unknown evaluation protocol {protocol!r}")
    return evaluate_predictions(
        predictions, samples, extractor, embedder, tau=tau, seed=seed
    )
