"""Benchmark construction: human-human pairs become human-robot samples.

The observed actor stays the model input; the partner's response is mapped
onto the robot by the kinematic oracle and becomes the supervision target,
together with the exact hand-to-surface distance field recomputed from the
built sample itself.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..errors import DataFormatError
from ..model.command import ActionCommand, Vocabulary, make_command
from ..retarget import RetargetMap, kinematic_retarget
from ..skeleton import (
    MotionFrame,
    MotionSequence,
    PoseParams,
    RigidTransform,
    SkeletonSpec,
    resample,
)
from ..surface import (
    AffordanceField,
    SurfaceProxy,
    affordance_ground_truth,
    build_binding,
    sample_body_surface,
)
from .interchange import InteractionPair, _open, _root_from_json, _root_to_json

log = logging.getLogger(__name__)

BENCHMARK_FORMAT = "hriloop-benchmark-v1"


@dataclass(frozen=True)
class HriSample:
    """One benchmark unit: aligned human input, robot target, distance-field
    target, and the command that names the interaction."""

    sample_id: str
    human_seq: MotionSequence
    surfaces: tuple[SurfaceProxy, ...]
    robot_seq: MotionSequence
    robot_poses: tuple[PoseParams, ...]
    affordance: AffordanceField
    command: ActionCommand
    robot_type: str
    split: str
    negative: bool = False
    negative_mode: str | None = None

    def __post_init__(self):
        if len(self.human_seq) != len(self.robot_seq):
            raise DataFormatError("human and robot sequences must be time-aligned")
        if self.affordance.horizon != len(self.human_seq):
            raise DataFormatError("affordance field must cover every frame")

    @property
    def frame_count(self) -> int:
        return len(self.human_seq)


def affordance_consistency(sample: HriSample, robot_spec: SkeletonSpec) -> float:
    """Max abs difference between the stored field and one recomputed from
    the sample's own surfaces and robot frames."""
    recomputed = affordance_ground_truth(
        list(sample.surfaces), list(sample.robot_seq.frames), robot_spec
    )
    return float(np.max(np.abs(recomputed.distances - sample.affordance.distances)))


@dataclass
class BuildResult:
    samples: list[HriSample]
    dropped: list[tuple[int, str]]


def build_interhri(
    pairs: list[InteractionPair],
    robot_spec: SkeletonSpec,
    retarget_map: RetargetMap,
    fps: float = 10.0,
    vertex_count: int = 64,
    human_spec: SkeletonSpec | None = None,
    id_prefix: str = "s",
) -> BuildResult:
    """Build benchmark samples from interaction pairs at the target fps.

    Pairs whose retargeting fails are dropped and logged, never silently
    kept. Split tags carry through untouched.
    """
    samples: list[HriSample] = []
    dropped: list[tuple[int, str]] = []
    binding = None
    vocab = Vocabulary.from_labels([p.action for p in pairs]) if pairs else Vocabulary(())
    for i, pair in enumerate(pairs):
        try:
            human = resample(pair.actor, fps)
            reactor = resample(pair.reactor, fps)
            hspec = human_spec or human.skeleton
            if binding is None:
                binding = build_binding(hspec, vertex_count)
            result = kinematic_retarget(reactor, retarget_map, robot_spec, hspec)
            surfaces = tuple(
                sample_body_surface(f, hspec, vertex_count, binding=binding)
                for f in human.frames
            )
            aff = affordance_ground_truth(
                list(surfaces), list(result.sequence.frames), robot_spec
            )
            samples.append(
                HriSample(
                    sample_id=f"{id_prefix}{i:05d}",
                    human_seq=human,
                    surfaces=surfaces,
                    robot_seq=result.sequence,
                    robot_poses=result.poses,
                    affordance=aff,
                    command=make_command(pair.action, vocab),
                    robot_type=robot_spec.name,
                    split=pair.split,
                )
            )
        except Exception as e:  # noqa: BLE001 - per-sample isolation is the contract
            log.warning("dropping pair %d (%s): %s", i, pair.action, e)
            dropped.append((i, str(e)))
    return BuildResult(samples=samples, dropped=dropped)


def assert_split_disjoint(samples: list[HriSample]) -> None:
    train = {s.sample_id for s in samples if s.split == "train"}
    test = {s.sample_id for s in samples if s.split == "test"}
    overlap = train & test
    if overlap:
        raise DataFormatError(f"split leakage: {sorted(overlap)[:5]}")


# -- on-disk benchmark ------------------------------------------------------


def save_benchmark(
    samples: list[HriSample],
    directory: str | Path,
    human_spec: SkeletonSpec,
    robot_spec: SkeletonSpec,
    vertex_count: int,
    gz: bool = False,
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    suffix = ".jsonl.gz" if gz else ".jsonl"
    manifest = {}
    for s in samples:
        fname = f"{s.sample_id}{suffix}"
        _write_sample(s, directory / fname)
        manifest[s.sample_id] = {
            "file": fname,
            "split": s.split,
            "command": s.command.text,
            "negative": s.negative,
        }
    meta = {
        "format": BENCHMARK_FORMAT,
        "fps": samples[0].human_seq.fps if samples else 10.0,
        "vertex_count": vertex_count,
        "robot_type": robot_spec.name,
        "human_skeleton": human_spec.to_json_dict(),
        "robot_skeleton": robot_spec.to_json_dict(),
        "vocab": sorted({s.command.text for s in samples}),
        "samples": manifest,
    }
    with open(directory / "meta.json", "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2)
    return directory


def _write_sample(s: HriSample, path: Path) -> None:
    header = {
        "sample_id": s.sample_id,
        "command": s.command.text,
        "split": s.split,
        "robot_type": s.robot_type,
        "negative": s.negative,
        "negative_mode": s.negative_mode,
        "fps": s.human_seq.fps,
    }
    with _open(path, "w") as f:
        f.write(json.dumps(header) + "\n")
        for hf, rf, pose in zip(s.human_seq.frames, s.robot_seq.frames, s.robot_poses):
            f.write(
                json.dumps(
                    {
                        "timestamp": hf.timestamp,
                        "human_joints": hf.joint_positions.tolist(),
                        "human_root": _root_to_json(hf.root),
                        "robot_joints": rf.joint_positions.tolist(),
                        "robot_root": _root_to_json(rf.root),
                        "robot_angles": pose.angles.tolist(),
                    }
                )
                + "\n"
            )


def load_benchmark(directory: str | Path) -> tuple[list[HriSample], dict]:
    """Load a benchmark directory; surfaces and distance fields are rebuilt
    deterministically from the stored skeleton data."""
    directory = Path(directory)
    with open(directory / "meta.json", "r", encoding="utf-8") as f:
        meta = json.load(f)
    if meta.get("format") != BENCHMARK_FORMAT:
        raise DataFormatError(f"unknown benchmark format {meta.get('format')!r}")
    human_spec = SkeletonSpec.from_json_dict(meta["human_skeleton"])
    robot_spec = SkeletonSpec.from_json_dict(meta["robot_skeleton"])
    vocab = Vocabulary(tuple(meta["vocab"]))
    binding = build_binding(human_spec, int(meta["vertex_count"]))
    samples = []
    for sid in sorted(meta["samples"]):
        entry = meta["samples"][sid]
        samples.append(
            _read_sample(
                directory / entry["file"], human_spec, robot_spec, binding, vocab
            )
        )
    return samples, meta


def _read_sample(path, human_spec, robot_spec, binding, vocab) -> HriSample:
    with _open(path, "r") as f:
        lines = [ln for ln in f if ln.strip()]
    try:
        header = json.loads(lines[0])
        fps = float(header["fps"])
        human_frames, robot_frames, poses = [], [], []
        for line in lines[1:]:
            rec = json.loads(line)
            t = float(rec["timestamp"])
            human_frames.append(
                MotionFrame(
                    np.array(rec["human_joints"]), _root_from_json(rec["human_root"]), t
                )
            )
            rroot = _root_from_json(rec["robot_root"])
            robot_frames.append(MotionFrame(np.array(rec["robot_joints"]), rroot, t))
            poses.append(PoseParams(np.array(rec["robot_angles"]), rroot))
    except (KeyError, ValueError, json.JSONDecodeError) as e:
        raise DataFormatError(f"{path}: {e}", record_index=0) from e
    human_seq = MotionSequence(human_spec, tuple(human_frames), fps)
    robot_seq = MotionSequence(robot_spec, tuple(robot_frames), fps)
    surfaces = tuple(
        sample_body_surface(f, human_spec, binding.vertex_count, binding=binding)
        for f in human_seq.frames
    )
    aff = affordance_ground_truth(list(surfaces), list(robot_frames), robot_spec)
    return HriSample(
        sample_id=header["sample_id"],
        human_seq=human_seq,
        surfaces=surfaces,
        robot_seq=robot_seq,
        robot_poses=tuple(poses),
        affordance=aff,
        command=make_command(header["command"], vocab),
        robot_type=header["robot_type"],
        split=header["split"],
        negative=bool(header.get("negative", False)),
        negative_mode=header.get("negative_mode"),
    )


# -- negative samples --------------------------------------------------------


def _replace_robot(
    sample: HriSample,
    robot_frames: list[MotionFrame],
    robot_spec: SkeletonSpec,
    mode: str,
    suffix: str,
) -> HriSample:
    robot_seq = MotionSequence(robot_spec, tuple(robot_frames), sample.robot_seq.fps)
    aff = affordance_ground_truth(
        list(sample.surfaces), list(robot_frames), robot_spec
    )
    return replace(
        sample,
        sample_id=f"{sample.sample_id}-{suffix}",
        robot_seq=robot_seq,
        affordance=aff,
        negative=True,
        negative_mode=mode,
    )


def make_negatives(
    samples: list[HriSample],
    mode: str,
    seed: int,
    robot_spec: SkeletonSpec,
    noise_sigma: float = 0.1,
) -> list[HriSample]:
    """Manufacture flagged negative samples.

    noise: per-joint Gaussian perturbation of the robot positions;
    static: the robot frozen at its first frame, ignoring the human;
    repair: robot targets deranged across samples (never self-paired).
    """
    if mode not in ("noise", "static", "repair"):
        raise ValueError(f"unknown negative mode {mode!r}")
    rng = np.random.default_rng(seed)
    out: list[HriSample] = []
    if mode == "noise":
        for s in samples:
            frames = [
                MotionFrame(
                    f.joint_positions
                    + rng.normal(0.0, noise_sigma, f.joint_positions.shape),
                    f.root,
                    f.timestamp,
                )
                for f in s.robot_seq.frames
            ]
            out.append(_replace_robot(s, frames, robot_spec, mode, "neg-noise"))
    elif mode == "static":
        for s in samples:
            first = s.robot_seq.frames[0]
            frames = [
                MotionFrame(first.joint_positions, first.root, f.timestamp)
                for f in s.robot_seq.frames
            ]
            out.append(_replace_robot(s, frames, robot_spec, mode, "neg-static"))
    else:  # repair: derangement within equal-length groups
        groups: dict[int, list[int]] = {}
        for i, s in enumerate(samples):
            groups.setdefault(s.frame_count, []).append(i)
        for indices in groups.values():
            if len(indices) < 2:
                log.warning("repair mode: singleton length group skipped")
                continue
            perm = _derangement(len(indices), rng)
            for local, target_local in enumerate(perm):
                src = samples[indices[local]]
                donor = samples[indices[target_local]]
                frames = [
                    MotionFrame(df.joint_positions, df.root, sf.timestamp)
                    for sf, df in zip(src.robot_seq.frames, donor.robot_seq.frames)
                ]
                out.append(_replace_robot(src, frames, robot_spec, mode, "neg-repair"))
    return out


def _derangement(n: int, rng: np.random.Generator) -> np.ndarray:
    for _ in range(100):
        perm = rng.permutation(n)
        if not np.any(perm == np.arange(n)):
            return perm
    return np.roll(np.arange(n), 1)  # rotation is always fixed-point-free
