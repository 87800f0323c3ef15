"""Procedural two-person interaction generator.

Each action template keyframes shoulder/elbow/trunk/knee angle-axis targets
on the 22-joint human rig, runs forward kinematics for both participants
facing each other, and (for contact actions) aligns the partner so the
designated hands meet at the templated contact time. Output is deterministic
per seed.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .. import assets
from ..skeleton import (
    MotionFrame,
    MotionSequence,
    PoseParams,
    RigidTransform,
    forward_kinematics,
)
from .interchange import InteractionPair

PELVIS_HEIGHT = 0.95
CONTACT_PHASE = 0.6  # fraction of the clip where hands meet
RAMP_START, RAMP_END = 0.10, 0.45
RELEASE_START, RELEASE_END = 0.78, 0.98
REACTION_LAG = 0.06
CONTACT_GAP = 0.03  # meters left between aligned hands


@dataclass(frozen=True)
class GestureTemplate:
    name: str
    arms: str  # "left" | "right" | "both" | "none"
    shoulder_peak: tuple[float, float, float]  # right-arm convention
    elbow_peak: tuple[float, float, float] = (0.0, 0.0, 0.0)
    trunk_pitch: float = 0.0
    knee_bend: float = 0.0
    oscillations: float = 0.0
    osc_amp: float = 0.0
    contact: bool = False
    separation: float = 2.4
    approach: float = 0.35


_FWD = np.pi / 2  # right arm from rest (-x) to forward (+z) about +y
_UP = -np.pi / 2  # right arm from rest to straight up about -z
_DIAG = (0.0, 1.1107, -1.1107)  # 90 deg about (0,1,-1)/sqrt(2): up-forward

CATALOG: dict[str, GestureTemplate] = {
    t.name: t
    for t in [
        GestureTemplate("high-five", "right", _DIAG, contact=True),
        GestureTemplate("high-five-left", "left", _DIAG, contact=True),
        GestureTemplate("high-five-both", "both", _DIAG, contact=True),
        GestureTemplate("handshake", "right", (0, _FWD * 0.85, 0), (0, 0.5, 0), contact=True),
        GestureTemplate("handshake-left", "left", (0, _FWD * 0.85, 0), (0, 0.5, 0), contact=True),
        GestureTemplate("fist-bump", "right", (0, _FWD * 0.95, 0), contact=True, approach=0.5),
        GestureTemplate("fist-bump-left", "left", (0, _FWD * 0.95, 0), contact=True, approach=0.5),
        GestureTemplate("wave", "right", (0, 0.6, _UP * 0.9), (0, 0, -0.6),
                        oscillations=3, osc_amp=0.35, separation=2.8, approach=0.0),
        GestureTemplate("wave-left", "left", (0, 0.6, _UP * 0.9), (0, 0, -0.6),
                        oscillations=3, osc_amp=0.35, separation=2.8, approach=0.0),
        GestureTemplate("wave-both", "both", (0, 0.6, _UP * 0.9), (0, 0, -0.6),
                        oscillations=3, osc_amp=0.35, separation=2.8, approach=0.0),
        GestureTemplate("push", "both", (0, _FWD, 0), contact=True, approach=0.45),
        GestureTemplate("push-low", "both", (0, _FWD * 0.75, 0), contact=True, approach=0.45),
        GestureTemplate("hug", "both", (0, _FWD * 0.9, 0), (0, 0.9, 0),
                        contact=True, approach=0.6),
        GestureTemplate("bow", "none", (0, 0, 0), trunk_pitch=0.7, separation=2.2, approach=0.1),
        GestureTemplate("salute", "right", (0, 0.35, _UP * 0.75), (0, 0, -1.5),
                        separation=2.6, approach=0.0),
        GestureTemplate("point", "right", (0, _FWD, 0), separation=2.8, approach=0.0),
        GestureTemplate("clap", "both", (0, _FWD * 0.8, 0), (0, 0.7, 0),
                        oscillations=4, osc_amp=0.25, separation=2.6, approach=0.0),
        GestureTemplate("beckon", "right", (0, _FWD * 0.9, 0), (0, 0.4, 0),
                        oscillations=3, osc_amp=0.4, separation=2.8, approach=0.0),
        GestureTemplate("stretch-up", "both", (0, 0, _UP), separation=2.4, approach=0.0),
        GestureTemplate("squat-greet", "right", (0, _FWD * 0.9, 0), knee_bend=0.5,
                        separation=2.4, approach=0.2),
    ]
}


def _smoothstep(x: float) -> float:
    x = min(max(x, 0.0), 1.0)
    return x * x * (3.0 - 2.0 * x)


def _envelope(u: float) -> float:
    rise = _smoothstep((u - RAMP_START) / (RAMP_END - RAMP_START))
    fall = 1.0 - _smoothstep((u - RELEASE_START) / (RELEASE_END - RELEASE_START))
    return min(rise, fall)


def _mirror(v: np.ndarray) -> np.ndarray:
    """Right-arm angle-axis to the left-arm equivalent (x-mirror)."""
    return np.array([v[0], -v[1], -v[2]])


def _gesture_angles(
    spec,
    template: GestureTemplate,
    u: float,
    rng_peaks: np.ndarray,
    frame_noise: np.ndarray,
) -> np.ndarray:
    angles = np.zeros((spec.joint_count, 3))
    env = _envelope(u)
    osc = 0.0
    if template.osc_amp:
        osc = template.osc_amp * np.sin(
            2 * np.pi * template.oscillations * max(u - RAMP_END, 0.0) / (RELEASE_START - RAMP_END)
        ) * env
    shoulder = np.array(template.shoulder_peak) + rng_peaks[0]
    elbow = np.array(template.elbow_peak) + rng_peaks[1]
    use_right = template.arms in ("right", "both")
    use_left = template.arms in ("left", "both")
    if use_right:
        rs = spec.joint_index("right_shoulder")
        re = spec.joint_index("right_elbow")
        angles[rs] = env * shoulder
        angles[re] = env * elbow + np.array([0.0, osc, 0.0])
    if use_left:
        ls = spec.joint_index("left_shoulder")
        le = spec.joint_index("left_elbow")
        angles[ls] = env * _mirror(shoulder)
        angles[le] = env * _mirror(elbow) + np.array([0.0, -osc, 0.0])
    if template.trunk_pitch:
        angles[spec.joint_index("spine1")] = [env * template.trunk_pitch, 0, 0]
    if template.knee_bend:
        bend = env * template.knee_bend
        angles[spec.joint_index("left_knee")] = [bend, 0, 0]
        angles[spec.joint_index("right_knee")] = [bend, 0, 0]
        angles[spec.joint_index("left_hip")] = [-bend * 0.6, 0, 0]
        angles[spec.joint_index("right_hip")] = [-bend * 0.6, 0, 0]
    angles += frame_noise
    return angles


_YAW_PI = np.array([0.0, 0.0, 1.0, 0.0])  # 180 deg about +y


def _actor_track(
    spec,
    template: GestureTemplate,
    frame_count: int,
    fps: float,
    rng: np.random.Generator,
    facing_positive_z: bool,
    lag: float,
    angle_noise: float,
) -> MotionSequence:
    rng_peaks = rng.normal(0.0, 0.04, (2, 3))
    half = template.separation / 2.0
    sign = 1.0 if facing_positive_z else -1.0
    rotation = np.array([1.0, 0, 0, 0]) if facing_positive_z else _YAW_PI
    frames = []
    for t in range(frame_count):
        u = t / max(frame_count - 1, 1)
        z = -sign * (half + template.approach * (1.0 - _envelope(u)))
        root = RigidTransform(
            rotation=rotation,
            translation=np.array([0.0, PELVIS_HEIGHT, z]),
        )
        noise = rng.normal(0.0, angle_noise, (spec.joint_count, 3))
        angles = _gesture_angles(spec, template, max(u - lag, 0.0), rng_peaks, noise)
        frames.append(forward_kinematics(spec, PoseParams(angles, root), t / fps))
    return MotionSequence(spec, tuple(frames), fps)


def _shift_sequence(seq: MotionSequence, delta: np.ndarray) -> MotionSequence:
    frames = []
    for f in seq.frames:
        root = RigidTransform(
            rotation=f.root.rotation,
            translation=f.root.translation + delta,
            scale=f.root.scale,
        )
        frames.append(MotionFrame(f.joint_positions + delta, root, f.timestamp))
    return MotionSequence(seq.skeleton, tuple(frames), seq.fps)


def generate_pair(
    action: str,
    seed: int,
    fps: float = 40.0,
    duration: float = 3.0,
    split: str = "train",
    angle_noise: float = 0.008,
) -> InteractionPair:
    """One deterministic interaction pair for a named catalog action."""
    template = CATALOG[action]
    spec = assets.load_skeleton("human22")
    rng = np.random.default_rng(
        np.random.SeedSequence([seed, zlib.crc32(action.encode())])
    )
    frame_count = int(round(duration * fps)) + 1
    actor = _actor_track(spec, template, frame_count, fps, rng, True, 0.0, angle_noise)
    reactor = _actor_track(
        spec, template, frame_count, fps, rng, False, REACTION_LAG, angle_noise
    )

    if template.contact:
        ci = int(round(CONTACT_PHASE * (frame_count - 1)))
        hand = "left_wrist" if template.arms == "left" else "right_wrist"
        a_idx = spec.joint_index(hand)
        r_idx = spec.joint_index(hand)
        target = actor.frames[ci].joint_positions[a_idx] + np.array([0, 0, CONTACT_GAP])
        delta = target - reactor.frames[ci].joint_positions[r_idx]
        delta[1] = 0.0  # keep the partner on the ground plane
        reactor = _shift_sequence(reactor, delta)

    return InteractionPair(actor=actor, reactor=reactor, action=action, split=split)


def synth_interactions(
    actions: list[str] | None,
    count: int,
    seed: int,
    fps: float = 40.0,
    duration: float = 3.0,
    test_fraction: float = 0.25,
    angle_noise: float = 0.008,
) -> list[InteractionPair]:
    """Generate `count` pairs cycling through the requested catalog actions.

    Every pair is independently seeded from (seed, index) so any subset is
    reproducible; the trailing fraction of pairs per action is tagged test.
    """
    if actions is None:
        actions = list(CATALOG)
    unknown = [a for a in actions if a not in CATALOG]
    if unknown:
        raise KeyError(f"unknown actions {unknown}; catalog: {sorted(CATALOG)}")
    pairs = []
    per_action = {}
    for i in range(count):
        action = actions[i % len(actions)]
        per_action[action] = per_action.get(action, 0) + 1
        pairs.append(
            generate_pair(
                action,
                seed=seed * 100003 + i,
                fps=fps,
                duration=duration,
                angle_noise=angle_noise,
            )
        )
    # Tag the last test_fraction of each action's pairs as test.
    totals = dict(per_action)
    seen: dict[str, int] = {}
    tagged = []
    for pair in pairs:
        seen[pair.action] = seen.get(pair.action, 0) + 1
        cut = int(np.ceil(totals[pair.action] * (1.0 - test_fraction)))
        split = "train" if seen[pair.action] <= cut else "test"
        tagged.append(
            InteractionPair(pair.actor, pair.reactor, pair.action, split)
        )
    return tagged
