"""Position, trajectory, orientation, and contact metrics.

All position metrics are reported in centimeters, orientation in degrees.
Frame order never matters: everything is a mean over frames (and joints or
effectors).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateGeometryError, ShapeError
from ..geometry import procrustes_align
from ..rotations import quat_geodesic_angle
from ..skeleton import MotionSequence
from ..surface import SurfaceProxy

M_TO_CM = 100.0
DEFAULT_CONTACT_TAU = 0.05  # meters; reported with every metrics run


def _check_aligned(pred: MotionSequence, gt: MotionSequence) -> None:
    if len(pred) != len(gt):
        raise ShapeError(f"sequence lengths differ: {len(pred)} vs {len(gt)}")
    if pred.skeleton.joint_count != gt.skeleton.joint_count:
        raise ShapeError("sequences have different joint counts")


def mpjpe(pred: MotionSequence, gt: MotionSequence) -> float:
    """Mean per-joint position error, cm."""
    _check_aligned(pred, gt)
    if not len(pred):
        return 0.0
    err = np.linalg.norm(pred.positions() - gt.positions(), axis=2)
    return float(err.mean() * M_TO_CM)


def pa_mpjpe_frames(pred: MotionSequence, gt: MotionSequence) -> tuple[list[float], int]:
    """Per-frame position error after per-frame similarity alignment, cm.

    Degenerate frames (alignment undefined) are skipped and counted rather
    than poisoning the mean.
    """
    _check_aligned(pred, gt)
    errors: list[float] = []
    skipped = 0
    for pf, gf in zip(pred.frames, gt.frames):
        try:
            tf, _ = procrustes_align(pf.joint_positions, gf.joint_positions)
        except DegenerateGeometryError:
            skipped += 1
            continue
        aligned = tf.apply(pf.joint_positions)
        errors.append(
            float(np.linalg.norm(aligned - gf.joint_positions, axis=1).mean()) * M_TO_CM
        )
    return errors, skipped


def pa_mpjpe(pred: MotionSequence, gt: MotionSequence) -> float:
    errors, _ = pa_mpjpe_frames(pred, gt)
    return float(np.mean(errors)) if errors else 0.0


def traj_error(pred: MotionSequence, gt: MotionSequence) -> float:
    """Mean root-position error, cm."""
    _check_aligned(pred, gt)
    if not len(pred):
        return 0.0
    err = np.linalg.norm(pred.root_translations() - gt.root_translations(), axis=1)
    return float(err.mean() * M_TO_CM)


def orie_error(pred: MotionSequence, gt: MotionSequence) -> float:
    """Mean geodesic angle between root orientations, degrees."""
    _check_aligned(pred, gt)
    if not len(pred):
        return 0.0
    angles = [
        quat_geodesic_angle(pf.root.rotation, gf.root.rotation)
        for pf, gf in zip(pred.frames, gt.frames)
    ]
    return float(np.degrees(np.mean(angles)))


@dataclass
class ContactMetrics:
    precision: float
    recall: float
    accuracy: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    degenerate: dict[str, bool] = field(default_factory=dict)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.precision, self.recall, self.accuracy, self.f1)


def contact_labels(
    seq: MotionSequence, surfaces: list[SurfaceProxy], tau: float
) -> np.ndarray:
    """(T, E) booleans: is each end effector within tau of the surface."""
    if len(surfaces) != len(seq):
        raise ShapeError("surface frames must match sequence length")
    if surfaces and surfaces[0].vertex_count == 0:
        raise ShapeError("empty surface")
    ee = seq.skeleton.end_effector_indices
    out = np.zeros((len(seq), len(ee)), dtype=bool)
    for t, (frame, surf) in enumerate(zip(seq.frames, surfaces)):
        hands = frame.joint_positions[ee]
        d = np.linalg.norm(hands[:, None, :] - surf.vertices[None, :, :], axis=2)
        out[t] = d.min(axis=1) < tau
    return out


def contact_metrics(
    pred: MotionSequence,
    gt: MotionSequence,
    surfaces: list[SurfaceProxy],
    tau: float = DEFAULT_CONTACT_TAU,
) -> ContactMetrics:
    """Binary contact classification over all (frame, effector) pairs.

    Metrics whose denominator is empty report 1.0 with a degenerate flag;
    callers exclude flagged values from aggregation by default.
    """
    if not surfaces:
        raise ShapeError("empty surface sequence")
    gt_labels = contact_labels(gt, surfaces, tau)
    pred_labels = contact_labels(pred, surfaces, tau)
    return contact_from_labels(pred_labels, gt_labels)


def contact_from_labels(pred_labels: np.ndarray, gt_labels: np.ndarray) -> ContactMetrics:
    p = pred_labels.reshape(-1)
    g = gt_labels.reshape(-1)
    tp = int(np.sum(p & g))
    fp = int(np.sum(p & ~g))
    fn = int(np.sum(~p & g))
    tn = int(np.sum(~p & ~g))
    degenerate: dict[str, bool] = {}

    if tp + fp == 0:
        precision, degenerate["precision"] = 1.0, True
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall, degenerate["recall"] = 1.0, True
    else:
        recall = tp / (tp + fn)
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total if total else 1.0
    if precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    if degenerate:
        degenerate["f1"] = True
    return ContactMetrics(
        precision=float(precision),
        recall=float(recall),
        accuracy=float(accuracy),
        f1=float(f1),
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        degenerate=degenerate,
    )
