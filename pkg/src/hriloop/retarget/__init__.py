from .kinematic import (
    RetargetResult,
    kinematic_retarget,
    skeleton_to_pose_ik,
    smooth_angle_tracks,
)
from .mapping import RetargetMap, identity_map, load_shipped_map
from .online import OnlineRetargeter, RetargeterConfig, online_retarget, train_retargeter

__all__ = [
    "RetargetMap",
    "RetargetResult",
    "OnlineRetargeter",
    "RetargeterConfig",
    "identity_map",
    "kinematic_retarget",
    "load_shipped_map",
    "online_retarget",
    "skeleton_to_pose_ik",
    "smooth_angle_tracks",
    "train_retargeter",
]
