"""Correspondence tables between a human skeleton and a robot skeleton."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import RetargetError
from ..skeleton import SkeletonSpec


@dataclass(frozen=True)
class RetargetMap:
    """Maps every robot joint to a human joint (or marks it derived) and
    carries the per-bone length ratio robot/human used to scale targets."""

    human_skeleton: str
    robot_skeleton: str
    robot_to_human: dict[str, str | None]  # None = derived joint
    bone_ratios: dict[str, float]  # robot joint name -> ratio
    end_effector_pairs: tuple[tuple[str, str], ...]  # (human, robot)

    def validate(self, human: SkeletonSpec, robot: SkeletonSpec) -> None:
        if human.name != self.human_skeleton or robot.name != self.robot_skeleton:
            raise RetargetError(
                f"map is for ({self.human_skeleton!r}, {self.robot_skeleton!r}), "
                f"got ({human.name!r}, {robot.name!r})"
            )
        human_names = set(human.joint_names)
        for rj in robot.joint_names:
            if rj not in self.robot_to_human:
                raise RetargetError(f"robot joint {rj!r} missing from map")
            hj = self.robot_to_human[rj]
            if hj is not None and hj not in human_names:
                raise RetargetError(f"robot joint {rj!r} maps to unknown {hj!r}")
        for rj, ratio in self.bone_ratios.items():
            if not ratio > 0:
                raise RetargetError(f"bone ratio for {rj!r} must be positive")
        for hj, rj in self.end_effector_pairs:
            if hj not in human_names or rj not in set(robot.joint_names):
                raise RetargetError(f"end-effector pair ({hj!r}, {rj!r}) invalid")

    @classmethod
    def from_json_dict(cls, d: dict) -> "RetargetMap":
        robot_to_human: dict[str, str | None] = {}
        ratios: dict[str, float] = {}
        for e in d["correspondences"]:
            robot_to_human[e["robot_joint"]] = e.get("human_joint")
            ratios[e["robot_joint"]] = float(e.get("bone_ratio", 1.0))
        pairs = tuple((p["human"], p["robot"]) for p in d.get("end_effector_pairs", []))
        return cls(
            human_skeleton=d["human_skeleton"],
            robot_skeleton=d["robot_skeleton"],
            robot_to_human=robot_to_human,
            bone_ratios=ratios,
            end_effector_pairs=pairs,
        )

    @classmethod
    def load(cls, path: str | Path) -> "RetargetMap":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json_dict(json.load(f))

    def to_json_dict(self) -> dict:
        return {
            "human_skeleton": self.human_skeleton,
            "robot_skeleton": self.robot_skeleton,
            "correspondences": [
                {
                    "robot_joint": rj,
                    "human_joint": hj,
                    "bone_ratio": self.bone_ratios.get(rj, 1.0),
                }
                for rj, hj in self.robot_to_human.items()
            ],
            "end_effector_pairs": [
                {"human": h, "robot": r} for h, r in self.end_effector_pairs
            ],
        }


def identity_map(spec: SkeletonSpec) -> RetargetMap:
    """Self-map used to recover pose angles from a skeleton's own positions."""
    return RetargetMap(
        human_skeleton=spec.name,
        robot_skeleton=spec.name,
        robot_to_human={n: n for n in spec.joint_names},
        bone_ratios={n: 1.0 for n in spec.joint_names},
        end_effector_pairs=tuple((n, n) for n in spec.end_effectors),
    )


def load_shipped_map(human: str, robot: str) -> RetargetMap:
    from .. import assets

    return RetargetMap.from_json_dict(assets.load_retarget_map_dict(human, robot))
