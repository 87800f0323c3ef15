"""Model hyperparameters and the typed feature containers passed between
the model's stages."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from ..errors import ShapeError

FEATURE_ROLES = ("vertex_features", "mrhf", "robot_encoded", "robot_fused")


@dataclass
class ModelConfig:
    human_joints: int = 22
    robot_joints: int = 16
    history: int = 16  # frames of context, the model sees history+1 frames
    horizon: int = 8  # future frames predicted, only the first is executed
    vertex_count: int = 64
    command_dim: int = 32
    d_low: int = 16
    d_mid: int = 16
    d_high: int = 16
    d_vertex: int = 24
    d_model: int = 48
    heads: int = 4
    encoder_layers: int = 1
    mrhf_levels: int = 3  # fixed three-scale hierarchy
    lambda_aff: float = 0.1
    fps: float = 10.0
    lr: float = 1e-3
    batch_size: int = 8
    train_steps: int = 2000
    seed: int = 0
    vocab: tuple[str, ...] = ()
    human_skeleton: str = "human22"
    robot_skeleton: str = "unitree_h1"
    effector_indices: tuple[int, ...] = (6, 9)  # robot hand joints

    def __post_init__(self):
        if self.history < 1 or self.horizon < 1:
            raise ValueError("history and horizon must be >= 1")
        if self.lambda_aff < 0:
            raise ValueError("lambda_aff must be nonnegative")
        if self.mrhf_levels != 3:
            raise ValueError("the feature hierarchy is fixed at 3 levels")
        self.vocab = tuple(self.vocab)
        self.effector_indices = tuple(self.effector_indices)

    @property
    def window(self) -> int:
        return self.history + 1

    @property
    def mrhf_dim(self) -> int:
        return self.d_low + self.d_mid + self.d_high

    @property
    def robot_frame_dim(self) -> int:
        # flattened joints + root translation + root angle-axis
        return self.robot_joints * 3 + 6

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["vocab"] = list(self.vocab)
        d["effector_indices"] = list(self.effector_indices)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["vocab"] = tuple(d.get("vocab", ()))
        d["effector_indices"] = tuple(d.get("effector_indices", (6, 9)))
        return cls(**d)


@dataclass(frozen=True)
class FeatureTensor:
    """Role-tagged intermediate feature array.

    ``aux`` threads anchoring info (last observed robot frame, timing)
    through the pipeline so downstream stages can reconstruct frames.
    """

    values: np.ndarray
    role: str
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.role not in FEATURE_ROLES:
            raise ShapeError(f"unknown feature role {self.role!r}")
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ShapeError(f"{self.role} features contain non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.values.shape)
