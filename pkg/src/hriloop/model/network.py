"""The full reactive motion generator and its receding-horizon stepper."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import torch
from torch import nn

from ..errors import ShapeError, SkeletonError, VocabularyError
from ..rotations import angle_axis_to_quat, quat_normalize, quat_to_angle_axis
from ..skeleton import MotionFrame, MotionSequence, RigidTransform, SkeletonSpec
from ..surface import AffordanceField, SurfaceProxy
from .affordance import AffordancePredictor
from .command import ActionCommand, CommandEmbedding, CommandTable, Vocabulary
from .config import FeatureTensor, ModelConfig
from .mrhf import MrhfEncoder
from .rollout import AffordanceGuidedPredictor, MotionDecoder, RolloutEncoder


def frame_to_vector(frame: MotionFrame) -> np.ndarray:
    """Flatten one robot frame to joints + root translation + root angle-axis."""
    aa = quat_to_angle_axis(frame.root.rotation)
    return np.concatenate(
        [frame.joint_positions.reshape(-1), frame.root.translation, aa]
    )


def vector_to_frame(vec: np.ndarray, joint_count: int, timestamp: float) -> MotionFrame:
    joints = vec[: joint_count * 3].reshape(joint_count, 3)
    trans = vec[joint_count * 3 : joint_count * 3 + 3]
    aa = vec[joint_count * 3 + 3 :]
    root = RigidTransform(
        rotation=quat_normalize(angle_axis_to_quat(aa)), translation=trans
    )
    return MotionFrame(joints, root, timestamp)


def frames_to_array(frames) -> np.ndarray:
    return np.stack([frame_to_vector(f) for f in frames])


def human_window_array(frames) -> np.ndarray:
    return np.stack([f.joint_positions.reshape(-1) for f in frames])


def surfaces_to_array(surfaces) -> np.ndarray:
    return np.stack([s.vertices for s in surfaces])


class InteractionModel(nn.Module):
    """Command-conditioned reactive robot motion model.

    Inputs per step: the human joint/vertex history, the robot's own recent
    frames, and the command embedding. Output: the next `horizon` robot
    frames plus the predicted hand-to-surface distance field.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        torch.manual_seed(config.seed)
        self.config = config
        self.vocab = Vocabulary(config.vocab)
        self.command_table = CommandTable(self.vocab, config.command_dim, config.seed)
        self.mrhf = MrhfEncoder(config)
        self.affordance = AffordancePredictor(config)
        self.rollout_encoder = RolloutEncoder(config)
        self.guided_predictor = AffordanceGuidedPredictor(config)
        self.decoder = MotionDecoder(config)
        # eval by default: the transformer eval fastpath is numerically
        # different from train mode, and serving must be reproducible
        self.eval()

    def observed_geometry(
        self, vert_hist: torch.Tensor, robot_hist: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """(last hands (B, E, 3), last vertices (B, V, 3), vertex velocity
        (B, V, 3)) from the raw history tensors."""
        j = self.config.robot_joints
        joints = robot_hist[:, -1, : j * 3].reshape(-1, j, 3)
        hands = joints[:, list(self.config.effector_indices)]
        verts = vert_hist[:, -1]
        if vert_hist.shape[1] > 1:
            vel = vert_hist[:, -1] - vert_hist[:, -2]
        else:
            vel = torch.zeros_like(verts)
        return hands, verts, vel

    def forward(
        self,
        human_hist: torch.Tensor,  # (B, T, J_H*3)
        vert_hist: torch.Tensor,  # (B, T, V, 3)
        robot_hist: torch.Tensor,  # (B, T, robot_frame_dim)
        cmd_ids: torch.Tensor,  # (B,)
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (motion (B, k, robot_frame_dim), affordance (B, k, E, V))."""
        cmd = self.command_table(cmd_ids)
        mrhf = self.mrhf(human_hist)
        vfeats = self.affordance.encode_vertices(vert_hist)
        geometry = self.observed_geometry(vert_hist, robot_hist)
        aff = self.affordance(vfeats, robot_hist, cmd, geometry)
        rfeats = self.rollout_encoder(robot_hist, mrhf)
        fused = self.guided_predictor(rfeats, aff, cmd)
        motion = self.decoder(fused, mrhf, robot_hist[:, -1])
        return motion, aff

    # -- domain-typed stage entry points ------------------------------------

    def _check_window(self, frames) -> None:
        if len(frames) != self.config.window:
            raise ShapeError(
                f"need exactly {self.config.window} history frames, got {len(frames)}"
            )

    def embed_command(self, cmd: ActionCommand) -> CommandEmbedding:
        return CommandEmbedding(vector=self.command_table.embed(cmd.text))

    def mrhf_encode(self, human_window: MotionSequence) -> FeatureTensor:
        self._check_window(human_window.frames)
        x = torch.from_numpy(human_window_array(human_window.frames)).float()
        with torch.no_grad():
            out = self.mrhf(x.unsqueeze(0))[0].double().numpy()
        return FeatureTensor(out, role="mrhf")

    def encode_vertices(self, surfaces: list[SurfaceProxy]) -> FeatureTensor:
        self._check_window(surfaces)
        v = torch.from_numpy(surfaces_to_array(surfaces)).float()
        with torch.no_grad():
            out = self.affordance.encode_vertices(v.unsqueeze(0))[0].double().numpy()
        velocity = (
            surfaces[-1].vertices - surfaces[-2].vertices
            if len(surfaces) > 1
            else np.zeros_like(surfaces[-1].vertices)
        )
        return FeatureTensor(
            out,
            role="vertex_features",
            aux={
                "last_vertices": surfaces[-1].vertices,
                "vertex_velocity": velocity,
            },
        )

    def predict_affordance(
        self,
        vertex_feats: FeatureTensor,
        robot_window: list[MotionFrame],
        cmd_emb: CommandEmbedding | ActionCommand,
    ) -> AffordanceField:
        self._check_window(robot_window)
        if vertex_feats.role != "vertex_features":
            raise ShapeError("expected vertex_features input")
        cmd = self._as_cmd_tensor(cmd_emb)
        vf = torch.from_numpy(vertex_feats.values).float().unsqueeze(0)
        rh = torch.from_numpy(frames_to_array(robot_window)).float().unsqueeze(0)
        geometry = None
        last_vertices = vertex_feats.aux.get("last_vertices")
        if last_vertices is not None:
            hands = robot_window[-1].joint_positions[
                list(self.config.effector_indices)
            ]
            velocity = vertex_feats.aux.get(
                "vertex_velocity", np.zeros_like(last_vertices)
            )
            geometry = (
                torch.from_numpy(np.asarray(hands)).float().unsqueeze(0),
                torch.from_numpy(np.asarray(last_vertices)).float().unsqueeze(0),
                torch.from_numpy(np.asarray(velocity)).float().unsqueeze(0),
            )
        with torch.no_grad():
            aff = self.affordance(vf, rh, cmd, geometry)[0].double().numpy()
        return AffordanceField(distances=aff, source="predicted")

    def rollout_encode(
        self, robot_window: list[MotionFrame], mrhf: FeatureTensor
    ) -> FeatureTensor:
        self._check_window(robot_window)
        if mrhf.role != "mrhf":
            raise ShapeError("expected mrhf input")
        rh = torch.from_numpy(frames_to_array(robot_window)).float().unsqueeze(0)
        mh = torch.from_numpy(mrhf.values).float().unsqueeze(0)
        with torch.no_grad():
            out = self.rollout_encoder(rh, mh)[0].double().numpy()
        last = robot_window[-1]
        return FeatureTensor(
            out,
            role="robot_encoded",
            aux={"last_vector": frame_to_vector(last), "last_timestamp": last.timestamp},
        )

    def affordance_guided_predict(
        self,
        robot_feats: FeatureTensor,
        aff: AffordanceField,
        cmd_emb: CommandEmbedding | ActionCommand,
    ) -> FeatureTensor:
        if robot_feats.role != "robot_encoded":
            raise ShapeError("expected robot_encoded input")
        if aff.horizon != self.config.horizon:
            raise ShapeError(
                f"affordance horizon {aff.horizon} != model horizon {self.config.horizon}"
            )
        cmd = self._as_cmd_tensor(cmd_emb)
        rf = torch.from_numpy(robot_feats.values).float().unsqueeze(0)
        af = torch.from_numpy(aff.distances).float().unsqueeze(0)
        with torch.no_grad():
            out = self.guided_predictor(rf, af, cmd)[0].double().numpy()
        return FeatureTensor(out, role="robot_fused", aux=dict(robot_feats.aux))

    def decode_motion(
        self, fused: FeatureTensor, mrhf: FeatureTensor
    ) -> list[MotionFrame]:
        if fused.role != "robot_fused" or mrhf.role != "mrhf":
            raise ShapeError("decode_motion needs (robot_fused, mrhf) features")
        last_vec = fused.aux.get("last_vector")
        if last_vec is None:
            raise ShapeError("fused features lost their last-frame anchor")
        t0 = float(fused.aux.get("last_timestamp", 0.0))
        f = torch.from_numpy(fused.values).float().unsqueeze(0)
        m = torch.from_numpy(mrhf.values).float().unsqueeze(0)
        lv = torch.from_numpy(np.asarray(last_vec)).float().unsqueeze(0)
        with torch.no_grad():
            motion = self.decoder(f, m, lv)[0].double().numpy()
        step = 1.0 / self.config.fps
        return [
            vector_to_frame(motion[i], self.config.robot_joints, t0 + (i + 1) * step)
            for i in range(motion.shape[0])
        ]

    def _as_cmd_tensor(self, cmd) -> torch.Tensor:
        if isinstance(cmd, ActionCommand):
            cmd = self.embed_command(cmd)
        return torch.from_numpy(cmd.vector).float().unsqueeze(0)


@dataclass(frozen=True)
class RolloutState:
    """Bounded, time-aligned history queues driving the receding horizon."""

    robot_frames: tuple[MotionFrame, ...]
    human_frames: tuple[MotionFrame, ...]
    surfaces: tuple[SurfaceProxy, ...]
    command: ActionCommand
    step_index: int = 0

    def queues_full(self, window: int) -> bool:
        return (
            len(self.robot_frames) == window
            and len(self.human_frames) == window
            and len(self.surfaces) == window
        )


def initial_state(
    model: InteractionModel, robot_start: MotionFrame, command: ActionCommand
) -> RolloutState:
    """Warm-up state: the robot queue is padded with the start frame; human
    history fills from the first observation."""
    if robot_start.joint_count != model.config.robot_joints:
        raise SkeletonError("robot start frame joint count mismatch")
    if command.text not in model.vocab:
        raise VocabularyError(f"command {command.text!r} not in model vocabulary")
    window = model.config.window
    return RolloutState(
        robot_frames=(robot_start,) * window,
        human_frames=(),
        surfaces=(),
        command=command,
        step_index=0,
    )


def step(
    state: RolloutState,
    human_obs: tuple[MotionFrame, SurfaceProxy],
    model: InteractionModel,
) -> tuple[MotionFrame, list[MotionFrame], RolloutState]:
    """One receding-horizon step.

    Appends the observation (padding the human queue with its first entry
    during warm-up), predicts `horizon` future frames, executes only the
    first, and rolls the robot queue forward by exactly that frame.
    """
    frame, surface = human_obs
    if frame.joint_count != model.config.human_joints:
        raise SkeletonError("human observation joint count mismatch")
    if surface.vertex_count != model.config.vertex_count:
        raise ShapeError(
            f"surface has {surface.vertex_count} vertices, model expects "
            f"{model.config.vertex_count}"
        )
    window = model.config.window
    human = (state.human_frames + (frame,))[-window:]
    surfs = (state.surfaces + (surface,))[-window:]
    if len(human) < window:  # warm-up: pad with the earliest observation
        human = (human[0],) * (window - len(human)) + human
        surfs = (surfs[0],) * (window - len(surfs)) + surfs

    hh = torch.from_numpy(human_window_array(human)).float().unsqueeze(0)
    vv = torch.from_numpy(surfaces_to_array(surfs)).float().unsqueeze(0)
    rr = torch.from_numpy(frames_to_array(state.robot_frames)).float().unsqueeze(0)
    ids = torch.tensor([state.command.id], dtype=torch.long)
    with torch.no_grad():
        motion, _ = model(hh, vv, rr, ids)
    motion = motion[0].double().numpy()
    t0 = frame.timestamp
    horizon = [
        vector_to_frame(motion[i], model.config.robot_joints, t0 + i / model.config.fps)
        for i in range(motion.shape[0])
    ]
    executed = horizon[0]
    new_state = replace(
        state,
        robot_frames=(state.robot_frames + (executed,))[-window:],
        human_frames=human,
        surfaces=surfs,
        step_index=state.step_index + 1,
    )
    return executed, horizon, new_state


def run_session(
    model: InteractionModel,
    human_frames: list[MotionFrame],
    surfaces: list[SurfaceProxy],
    command: ActionCommand,
    robot_start: MotionFrame,
    robot_spec: SkeletonSpec,
) -> MotionSequence:
    """Drive a full receding-horizon session; returns the executed sequence."""
    state = initial_state(model, robot_start, command)
    executed = []
    for frame, surface in zip(human_frames, surfaces):
        out, _, state = step(state, (frame, surface), model)
        executed.append(out)
    return MotionSequence(robot_spec, tuple(executed), model.config.fps)
