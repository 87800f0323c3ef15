"""Access to the JSON data files shipped inside the package."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

from .skeleton import SkeletonSpec

SHIPPED_SKELETONS = ("human22", "unitree_h1", "leju_kuavo")


def _read_json(filename: str) -> dict:
    ref = resources.files("hriloop").joinpath("specs", filename)
    with ref.open("r", encoding="utf-8") as f:
        return json.load(f)


@lru_cache(maxsize=None)
def load_skeleton(name: str) -> SkeletonSpec:
    if name not in SHIPPED_SKELETONS:
        raise KeyError(f"no shipped skeleton {name!r}; available: {SHIPPED_SKELETONS}")
    return SkeletonSpec.from_json_dict(_read_json(f"{name}.json"))


@lru_cache(maxsize=None)
def capsule_radii(skeleton_name: str = "human22") -> dict[str, float]:
    """Per-bone capsule radius table, keyed by the bone's child joint."""
    data = _read_json(f"{skeleton_name}.capsules.json")
    return {k: float(v) for k, v in data["bone_radius"].items()}


def retarget_map_path(human: str, robot: str):
    return resources.files("hriloop").joinpath("specs", f"map_{human}_{robot}.json")


def load_retarget_map_dict(human: str, robot: str) -> dict:
    return _read_json(f"map_{human}_{robot}.json")
