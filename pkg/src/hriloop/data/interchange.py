"""Neutral on-disk interchange for two-person interaction recordings.

One pair per JSON-lines file: a header line with metadata, then one line per
frame carrying both actors' joints and root transforms. Gzip transparently
supported via the ``.gz`` suffix. External datasets are brought in through
registered converters; the package itself does not read any third-party
format directly.
"""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from ..errors import DataFormatError
from ..skeleton import (
    MotionFrame,
    MotionSequence,
    RigidTransform,
    SkeletonSpec,
)

FORMAT_NAME = "hriloop-pairs-v1"


@dataclass(frozen=True)
class InteractionPair:
    """One two-person interaction: the observed actor and the partner whose
    response becomes the robot target."""

    actor: MotionSequence
    reactor: MotionSequence
    action: str
    split: str = "train"

    def __post_init__(self):
        if not self.action:
            raise DataFormatError("action label must be nonempty")
        if self.split not in ("train", "test"):
            raise DataFormatError(f"split must be train|test, got {self.split!r}")
        if len(self.actor) != len(self.reactor):
            raise DataFormatError(
                f"actor has {len(self.actor)} frames, reactor {len(self.reactor)}"
            )
        if abs(self.actor.fps - self.reactor.fps) > 1e-9:
            raise DataFormatError("actor/reactor fps mismatch")


def _open(path: Path, mode: str):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def _root_to_json(r: RigidTransform) -> dict:
    return {
        "rotation": r.rotation.tolist(),
        "translation": r.translation.tolist(),
        "scale": r.scale,
    }


def _root_from_json(d: dict) -> RigidTransform:
    return RigidTransform(
        rotation=np.array(d["rotation"]),
        translation=np.array(d["translation"]),
        scale=float(d.get("scale", 1.0)),
    )


def write_pair(pair: InteractionPair, path: str | Path) -> None:
    path = Path(path)
    header = {
        "format": FORMAT_NAME,
        "action": pair.action,
        "split": pair.split,
        "fps": pair.actor.fps,
        "skeleton": pair.actor.skeleton.to_json_dict(),
    }
    with _open(path, "w") as f:
        f.write(json.dumps(header) + "\n")
        for a, r in zip(pair.actor.frames, pair.reactor.frames):
            rec = {
                "timestamp": a.timestamp,
                "actor": {
                    "joints": a.joint_positions.tolist(),
                    "root": _root_to_json(a.root),
                },
                "reactor": {
                    "joints": r.joint_positions.tolist(),
                    "root": _root_to_json(r.root),
                },
            }
            f.write(json.dumps(rec) + "\n")


def read_pair(path: str | Path) -> InteractionPair:
    path = Path(path)
    with _open(path, "r") as f:
        lines = [ln for ln in f if ln.strip()]
    if not lines:
        raise DataFormatError(f"{path} is empty", record_index=0)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{path}: bad header: {e}", record_index=0) from e
    if header.get("format") != FORMAT_NAME:
        raise DataFormatError(
            f"{path}: unknown format {header.get('format')!r}", record_index=0
        )
    skeleton = SkeletonSpec.from_json_dict(header["skeleton"])
    fps = float(header["fps"])
    actor_frames, reactor_frames = [], []
    for idx, line in enumerate(lines[1:], start=1):
        try:
            rec = json.loads(line)
            t = float(rec["timestamp"])
            actor_frames.append(
                MotionFrame(
                    np.array(rec["actor"]["joints"], dtype=np.float64),
                    _root_from_json(rec["actor"]["root"]),
                    t,
                )
            )
            reactor_frames.append(
                MotionFrame(
                    np.array(rec["reactor"]["joints"], dtype=np.float64),
                    _root_from_json(rec["reactor"]["root"]),
                    t,
                )
            )
        except (KeyError, ValueError, json.JSONDecodeError) as e:
            raise DataFormatError(f"{path}: bad record: {e}", record_index=idx) from e
    try:
        actor = MotionSequence(skeleton, tuple(actor_frames), fps)
        reactor = MotionSequence(skeleton, tuple(reactor_frames), fps)
        return InteractionPair(
            actor=actor,
            reactor=reactor,
            action=header["action"],
            split=header.get("split", "train"),
        )
    except Exception as e:
        raise DataFormatError(f"{path}: inconsistent pair: {e}", record_index=0) from e


def write_pairs(pairs: list[InteractionPair], directory: str | Path, gz: bool = False) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    suffix = ".jsonl.gz" if gz else ".jsonl"
    paths = []
    for i, pair in enumerate(pairs):
        p = directory / f"pair_{i:05d}{suffix}"
        write_pair(pair, p)
        paths.append(p)
    return paths


def load_pairs(path: str | Path, format: str = "jsonl") -> list[InteractionPair]:
    """Load all pairs under a directory (or a single pair file)."""
    if format not in ("jsonl",):
        raise DataFormatError(f"unsupported pair format {format!r}")
    path = Path(path)
    if path.is_file():
        return [read_pair(path)]
    files = sorted(
        p for p in path.glob("*.jsonl*") if p.suffix in (".jsonl", ".gz")
    )
    return [read_pair(p) for p in files]


# Converters turn an external dataset layout into interchange files. The
# registry ships empty on purpose: wiring a proprietary mocap corpus means
# registering a function here, nothing in the core changes.
_CONVERTERS: dict[str, Callable[[Path, Path], list[Path]]] = {}


def register_converter(name: str, fn: Callable[[Path, Path], list[Path]]) -> None:
    _CONVERTERS[name] = fn


def convert_dataset(name: str, src: str | Path, out_dir: str | Path) -> list[Path]:
    if name not in _CONVERTERS:
        raise DataFormatError(
            f"no converter registered for {name!r}; available: {sorted(_CONVERTERS)}"
        )
    return _CONVERTERS[name](Path(src), Path(out_dir))
