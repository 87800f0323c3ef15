"""Acceptance suite: one test per release criterion, each printing a PASS
line with its measured numbers. Tolerances are pinned here, not tuned later.

Run with `pytest tests/test_acceptance.py -v -s` to see the PASS lines.
"""

import copy
import time

import numpy as np
import pytest
import torch

from hriloop import assets
from hriloop.adaptation import (
    AdaptationConfig,
    adaptation_loss,
    finetune,
    records_from_samples,
)
from hriloop.data import (
    affordance_consistency,
    assert_split_disjoint,
    build_interhri,
    make_negatives,
    synth_interactions,
)
from hriloop.geometry import procrustes_align
from hriloop.metrics import fid, fit_eval_heads, mpjpe, pa_mpjpe, r_score
from hriloop.model import (
    InteractionModel,
    ModelConfig,
    finite_difference_check,
    initial_state,
    make_command,
    step,
    train,
)
from hriloop.model.training import extract_windows, training_losses
from hriloop.retarget import (
    OnlineRetargeter,
    RetargeterConfig,
    load_shipped_map,
    online_retarget,
    train_retargeter,
)
from hriloop.retarget.online import mean_angle_error_deg
from hriloop.rotations import angle_axis_to_matrix, quat_normalize
from hriloop.skeleton import (
    MotionFrame,
    RigidTransform,
    forward_kinematics,
    rest_pose,
    sequence_from_positions,
)
from hriloop.surface import affordance_ground_truth, build_binding, sample_body_surface

torch.set_num_threads(1)

HUMAN = assets.load_skeleton("human22")
ROBOT = assets.load_skeleton("unitree_h1")
RMAP = load_shipped_map("human22", "unitree_h1")


def ok(name: str, detail: str = "") -> None:
    print(f"\nPASS: {name}" + (f" ({detail})" if detail else ""))


# =============================================================================
# Criterion 1: kinematics & geometry suite, < 1 minute
# =============================================================================


class TestKinematicsGeometry:
    def test_kinematics_and_geometry_suite(self):
        started = time.monotonic()
        rng = np.random.default_rng(1)

        # FK identity: zero pose lands on cumulative rest offsets, exactly.
        frame = forward_kinematics(HUMAN, rest_pose(HUMAN))
        expected = np.zeros((HUMAN.joint_count, 3))
        for i, joint in enumerate(HUMAN.joints):
            if joint.parent is not None:
                expected[i] = expected[joint.parent] + joint.rest_offset
        assert np.array_equal(frame.joint_positions, expected)

        # FK equivariance under pure root translation, exact.
        d = np.array([0.4, -0.2, 1.5])
        moved = forward_kinematics(HUMAN, rest_pose(HUMAN, RigidTransform(translation=d)))
        assert np.abs(moved.joint_positions - (frame.joint_positions + d)).max() < 1e-12

        # Procrustes recovers a known similarity transform, residual < 1e-9.
        pts = rng.normal(0, 1, (22, 3))
        rot = angle_axis_to_matrix(np.array([0.4, -0.8, 0.2]))
        target = 1.7 * pts @ rot.T + np.array([0.3, -2.0, 1.0])
        tf, residual = procrustes_align(pts, target)
        assert residual < 1e-9
        assert abs(tf.scale - 1.7) < 1e-9

        # pa_mpjpe <= mpjpe on 1,000 random instances.
        for _ in range(1000):
            a = sequence_from_positions(ROBOT, rng.normal(0, 1, (1, 16, 3)), 10)
            b = sequence_from_positions(ROBOT, rng.normal(0, 1, (1, 16, 3)), 10)
            assert pa_mpjpe(a, b) <= mpjpe(a, b) + 1e-9

        # IK round trip within 1e-3 m of reachable targets, against the
        # grid-search oracle from the unit suite.
        from test_retarget_kinematic import grid_search_ik, planar_arm_spec, run_dls

        spec = planar_arm_spec()
        for trial in range(6):
            radius = rng.uniform(0.25, 0.7)
            phi = rng.uniform(-np.pi, np.pi)
            target = np.array([radius * np.cos(phi), radius * np.sin(phi), 0.0])
            _, oracle_err = grid_search_ik(target)
            assert oracle_err < 1e-6
            end = run_dls(spec, target)
            assert np.linalg.norm(end - target) < 1e-3

        elapsed = time.monotonic() - started
        assert elapsed < 60.0
        ok("kinematics & geometry suite", f"{elapsed:.1f}s")


# =============================================================================
# Criterion 2: affordance oracle suite
# =============================================================================


class TestAffordanceOracle:
    def test_affordance_matches_brute_force_and_rigid_invariance(self):
        rng = np.random.default_rng(2)
        binding = build_binding(HUMAN, 25)
        worst = 0.0
        for _ in range(100):
            human_frame = MotionFrame(
                rng.normal(0, 1, (22, 3)), RigidTransform.identity(), 0.0
            )
            surf = sample_body_surface(human_frame, HUMAN, 25, binding=binding)
            robot_frame = MotionFrame(
                rng.normal(0, 1, (16, 3)), RigidTransform.identity(), 0.0
            )
            field = affordance_ground_truth([surf], [robot_frame], ROBOT)
            for e, je in enumerate(ROBOT.end_effector_indices):
                for v in range(25):
                    brute = np.sqrt(
                        np.sum(
                            (robot_frame.joint_positions[je] - surf.vertices[v]) ** 2
                        )
                    )
                    worst = max(worst, abs(field.distances[0, e, v] - brute))
        assert worst < 1e-12

        # rigid invariance under a common transform
        tf = RigidTransform(
            rotation=quat_normalize(rng.normal(0, 1, 4)),
            translation=rng.normal(0, 2, 3),
        )
        human_frame = forward_kinematics(HUMAN, rest_pose(HUMAN))
        robot_frame = forward_kinematics(ROBOT, rest_pose(ROBOT))
        surf = sample_body_surface(human_frame, HUMAN, 25, binding=binding)
        base = affordance_ground_truth([surf], [robot_frame], ROBOT)
        moved_human = MotionFrame(tf.apply(human_frame.joint_positions), tf, 0.0)
        moved_surf = sample_body_surface(moved_human, HUMAN, 25, binding=binding)
        moved_robot = MotionFrame(tf.apply(robot_frame.joint_positions), tf, 0.0)
        moved = affordance_ground_truth([moved_surf], [moved_robot], ROBOT)
        drift = np.max(np.abs(moved.distances - base.distances))
        assert drift < 1e-9
        ok("affordance oracle suite", f"brute-force max |err| {worst:.1e}, rigid drift {drift:.1e}")


# =============================================================================
# Criterion 3: metric oracle suite
# =============================================================================


class TestMetricOracles:
    def test_metrics_against_naive_implementations(self):
        rng = np.random.default_rng(3)
        # mpjpe vs naive loops, < 1e-9
        for _ in range(20):
            a = sequence_from_positions(ROBOT, rng.normal(0, 1, (3, 16, 3)), 10)
            b = sequence_from_positions(ROBOT, rng.normal(0, 1, (3, 16, 3)), 10)
            naive = np.mean(
                [
                    np.linalg.norm(fa.joint_positions[j] - fb.joint_positions[j])
                    for fa, fb in zip(a.frames, b.frames)
                    for j in range(16)
                ]
            )
            assert abs(mpjpe(a, b) - 100 * naive) < 1e-9

        # traj and orie vs naive
        from hriloop.metrics import orie_error, traj_error
        from hriloop.rotations import quat_geodesic_angle

        roots_a = [RigidTransform(translation=rng.normal(0, 1, 3)) for _ in range(4)]
        roots_b = [RigidTransform(translation=rng.normal(0, 1, 3)) for _ in range(4)]
        a = sequence_from_positions(ROBOT, np.zeros((4, 16, 3)), 10, roots_a)
        b = sequence_from_positions(ROBOT, np.zeros((4, 16, 3)), 10, roots_b)
        naive_traj = 100 * np.mean(
            [np.linalg.norm(x.translation - y.translation) for x, y in zip(roots_a, roots_b)]
        )
        assert abs(traj_error(a, b) - naive_traj) < 1e-9
        naive_orie = np.degrees(
            np.mean([quat_geodesic_angle(x.rotation, y.rotation) for x, y in zip(roots_a, roots_b)])
        )
        assert abs(orie_error(a, b) - naive_orie) < 1e-9

        # contact metrics vs naive double loop (already < 1e-12 in unit suite)
        from hriloop.metrics import contact_from_labels

        gt = rng.random((6, 2)) < 0.4
        pred = rng.random((6, 2)) < 0.4
        m = contact_from_labels(pred, gt)
        tp = int(np.sum(pred & gt)); fp = int(np.sum(pred & ~gt))
        fn = int(np.sum(~pred & gt)); tn = int(np.sum(~pred & ~gt))
        prec = tp / (tp + fp) if tp + fp else 1.0
        rec = tp / (tp + fn) if tp + fn else 1.0
        assert abs(m.precision - prec) < 1e-12 and abs(m.recall - rec) < 1e-12

        # FID analytic cases within 1e-6
        feats = rng.normal(0, 1, (64, 8))
        assert abs(fid(feats, feats)) < 1e-6
        shift = np.array([1.0, -0.5, 2.0, 0.0, 0.3, -1.2, 0.8, 0.1])
        assert abs(fid(feats, feats + shift) - np.sum(shift**2)) < 1e-6
        ok("metric oracle suite", "mpjpe/traj/orie/contact/fid vs independent oracles")

    def test_rscore_monte_carlo_three_over_thirtytwo(self):
        # Random embedder, N = 1e4, expect 3/32 within +-0.03.
        n = 10_000
        dummy_seq = sequence_from_positions(ROBOT, np.zeros((4, 16, 3)), 10)
        samples = [(f"t{i:05d}", dummy_seq) for i in range(n)]
        master = np.random.default_rng(42)
        vectors = {t: master.normal(0, 1, 6) for t, _ in samples}
        score = r_score(
            samples,
            text_emb=lambda t: vectors[t],
            motion_emb=lambda s: np.zeros(6),
            pool_size=32,
            seed=7,
        )
        assert abs(score - 3 / 32) < 0.03
        ok("r-score Monte Carlo", f"{score:.4f} vs 3/32 = {3/32:.4f}")


# =============================================================================
# Criterion 4 fixtures: the overfit corpus and model (n=16, k=8)
# =============================================================================


@pytest.fixture(scope="module")
def overfit_corpus():
    # noise-free clips: an overfit gate must not demand memorizing
    # i.i.d. per-frame jitter that is unpredictable by construction
    pairs = synth_interactions(
        ["high-five", "handshake", "wave", "push"], 8, seed=11, duration=3.0,
        angle_noise=0.0,
    )
    built = build_interhri(pairs, ROBOT, RMAP, vertex_count=32)
    assert len(built.samples) == 8
    return built.samples


@pytest.fixture(scope="module")
def overfit_model(overfit_corpus):
    vocab = tuple(sorted({s.command.text for s in overfit_corpus}))
    config = ModelConfig(
        history=16,
        horizon=8,
        vertex_count=32,
        command_dim=16,
        d_low=16,
        d_mid=16,
        d_high=16,
        d_vertex=24,
        d_model=48,
        heads=4,
        vocab=vocab,
        train_steps=2000,
        batch_size=8,
        lr=2e-3,
        seed=5,
    )
    model = InteractionModel(config)
    started = time.monotonic()
    model, result = train(model, overfit_corpus)
    elapsed = time.monotonic() - started
    return model, result, elapsed


def train_window_errors(model, samples):
    """(train MPJPE cm, affordance mean abs error cm) on all windows."""
    windows, _ = extract_windows(samples, model.config, model.vocab)
    tensors = windows.to_tensors()
    human, verts, robot, cmd_ids, target_motion, target_aff = tensors
    with torch.no_grad():
        motion, aff = model(human, verts, robot, cmd_ids)
    j = model.config.robot_joints
    pred_joints = motion[..., : j * 3].reshape(motion.shape[0], motion.shape[1], j, 3)
    gt_joints = target_motion[..., : j * 3].reshape_as(pred_joints)
    mpjpe_cm = float(torch.linalg.norm(pred_joints - gt_joints, dim=-1).mean()) * 100
    aff_cm = float(torch.mean(torch.abs(aff - target_aff))) * 100
    return mpjpe_cm, aff_cm


class TestModelOverfit:
    def test_overfit_reaches_two_centimeters(self, overfit_model, overfit_corpus):
        model, result, elapsed = overfit_model
        assert elapsed < 600.0, f"training took {elapsed:.0f}s, budget is 10 min"
        train_mpjpe, aff_err = train_window_errors(model, overfit_corpus)
        assert train_mpjpe < 2.0, f"train MPJPE {train_mpjpe:.2f} cm"
        assert aff_err < 2.0, f"affordance mean error {aff_err:.2f} cm"
        ok(
            "model overfit suite",
            f"train MPJPE {train_mpjpe:.2f} cm, affordance {aff_err:.2f} cm, "
            f"{result.steps} steps in {elapsed:.0f}s",
        )

    def test_gradient_checks_all_four_loss_components(self, overfit_corpus):
        vocab = tuple(sorted({s.command.text for s in overfit_corpus}))
        config = ModelConfig(
            history=6, horizon=3, vertex_count=32, command_dim=8,
            d_low=8, d_mid=8, d_high=8, d_vertex=8, d_model=16, heads=2,
            vocab=vocab, seed=9,
        )
        model = InteractionModel(config).double()
        windows, _ = extract_windows(overfit_corpus, config, model.vocab)
        tensors = windows.select(np.arange(4)).to_tensors(torch.float64)

        def motion_loss():
            return training_losses(model, tensors)[0]

        def aff_loss():
            return training_losses(model, tensors)[1]

        pos = windows.select(np.arange(4))
        neg = windows.select(np.arange(4, 8))
        raw_cfg = AdaptationConfig(alpha=0.3, mode="raw")
        margin_cfg = AdaptationConfig(alpha=0.3, mode="margin", margin=0.5)

        def adapt_raw():
            return adaptation_loss(model, pos, neg, raw_cfg)

        def adapt_margin():
            return adaptation_loss(model, pos, neg, margin_cfg)

        worst = {}
        for name, fn in [
            ("motion_mse", motion_loss),
            ("affordance_mse", aff_loss),
            ("adaptation_raw", adapt_raw),
            ("adaptation_margin", adapt_margin),
        ]:
            rel = finite_difference_check(model, fn, n_params=16, eps=1e-4, seed=3)
            worst[name] = rel
            assert rel < 1e-3, f"{name}: rel err {rel:.2e}"
        detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
        ok("gradient checks (4 loss components)", detail)


# =============================================================================
# Criterion 5: receding-horizon contract
# =============================================================================


class TestRecedingHorizon:
    def test_session_contract(self, overfit_model, overfit_corpus):
        model, _, _ = overfit_model
        sample = overfit_corpus[0]
        t_steps = sample.frame_count
        start = forward_kinematics(ROBOT, rest_pose(ROBOT))
        state = initial_state(
            model, start, make_command(sample.command.text, model.vocab)
        )
        executed = []
        for frame, surface in zip(sample.human_seq.frames, sample.surfaces):
            out, horizon, state = step(state, (frame, surface), model)
            assert out is horizon[0]
            assert len(horizon) == model.config.horizon
            assert len(state.robot_frames) == model.config.window
            executed.append(out)
        assert len(executed) == t_steps
        ok(
            "receding-horizon contract",
            f"{t_steps} observations -> {len(executed)} executed frames, "
            f"history pinned at {model.config.window}",
        )


# =============================================================================
# Criterion 6: retargeter overfit, < 2 degrees
# =============================================================================


class TestRetargeterOverfit:
    def test_two_degree_angle_error(self):
        pairs = synth_interactions(
            ["high-five", "wave", "handshake"], 3, seed=13, duration=3.0,
            angle_noise=0.0,
        )
        built = build_interhri(pairs, ROBOT, RMAP, vertex_count=32)
        labeled = [(s.robot_seq, s.robot_poses) for s in built.samples]
        # a rest-pose hold is part of the toy set: constant input must give
        # near-constant output
        rest = forward_kinematics(ROBOT, rest_pose(ROBOT))
        hold = sequence_from_positions(
            ROBOT, np.stack([rest.joint_positions] * 20), 10.0
        )
        from hriloop.skeleton import PoseParams

        hold_poses = tuple(
            PoseParams(np.zeros((16, 3)), f.root) for f in hold.frames
        )
        labeled.append((hold, hold_poses))
        assert len(labeled) == 4

        config = RetargeterConfig(
            joint_count=ROBOT.joint_count, d_model=48, gru_hidden=48,
            steps=1600, lr=2e-3, seed=2,
        )
        model = OnlineRetargeter(config)
        model, _ = train_retargeter(model, labeled, config)

        errors = []
        for seq, poses in labeled:
            pred, _ = online_retarget(seq, model)
            errors.append(mean_angle_error_deg(pred, list(poses)))
        mean_err = float(np.mean(errors))
        assert mean_err < 2.0, f"mean angle error {mean_err:.2f} deg"

        pred_hold, diag = online_retarget(hold, model)
        assert diag["mean_frame_delta_deg"] < 0.5
        ok(
            "retargeter overfit",
            f"mean angle error {mean_err:.2f} deg, hold-delta "
            f"{diag['mean_frame_delta_deg']:.3f} deg/frame",
        )


# =============================================================================
# Criterion 7: adaptation trend across budgets (scaled)
# =============================================================================

BASE_ACTIONS = [
    "high-five", "high-five-left", "high-five-both", "handshake", "handshake-left",
    "fist-bump", "fist-bump-left", "wave", "wave-left", "wave-both",
    "push", "push-low", "bow", "point", "stretch-up",
]
HELDOUT_ACTIONS = ["hug", "salute", "clap", "beckon", "squat-greet"]


def trend_model_config(vocab, seed):
    return ModelConfig(
        history=8, horizon=4, vertex_count=32, command_dim=16,
        d_low=12, d_mid=12, d_high=12, d_vertex=16, d_model=32, heads=4,
        vocab=vocab, train_steps=700, batch_size=8, lr=2e-3, seed=seed,
    )


@pytest.fixture(scope="module")
def trend_setup():
    vocab = tuple(sorted(BASE_ACTIONS + HELDOUT_ACTIONS))
    base_pairs = synth_interactions(BASE_ACTIONS, 30, seed=17, duration=2.0, fps=20.0)
    base_samples = build_interhri(base_pairs, ROBOT, RMAP, vertex_count=32).samples

    heldout_pairs = synth_interactions(
        HELDOUT_ACTIONS, 10, seed=19, duration=2.0, fps=20.0
    )
    heldout_samples = build_interhri(
        heldout_pairs, ROBOT, RMAP, vertex_count=32, id_prefix="h"
    ).samples

    adapt_pairs = synth_interactions(
        HELDOUT_ACTIONS, 400, seed=23, duration=2.0, fps=20.0
    )
    adapt_samples = build_interhri(
        adapt_pairs, ROBOT, RMAP, vertex_count=32, id_prefix="a"
    ).samples

    base_model = InteractionModel(trend_model_config(vocab, seed=1))
    base_model, _ = train(base_model, base_samples)
    heads = fit_eval_heads(heldout_samples, ROBOT, seed=0)
    return base_model, heldout_samples, adapt_samples, heads


class TestAdaptationTrend:
    def test_budget_scaling_improves_heldout(self, trend_setup):
        base_model, heldout, adapt_samples, heads = trend_setup
        positives = records_from_samples(adapt_samples, rating=5)
        neg_third = len(adapt_samples) // 3
        negatives = []
        for mode, lo, hi in (
            ("noise", 0, neg_third),
            ("static", neg_third, 2 * neg_third),
            ("repair", 2 * neg_third, len(adapt_samples)),
        ):
            negatives += records_from_samples(
                make_negatives(adapt_samples[lo:hi], mode, seed=29, robot_spec=ROBOT),
                rating=1,
                session_prefix=f"neg-{mode}",
            )
        records = positives + negatives

        budgets = (50, 200, 800)
        results = {}
        base_mpjpe = None
        for seed in (0, 1, 2):
            per_budget = []
            for budget in budgets:
                cfg = AdaptationConfig(
                    steps=250, lr=5e-4, seed=seed, sample_budget=budget, mode="margin",
                )
                out = finetune(
                    base_model, records, cfg, heldout=heldout,
                    robot_spec=ROBOT, human_spec=HUMAN, heads=heads,
                )
                per_budget.append(out.after.mpjpe)
                base_mpjpe = out.before.mpjpe
            results[seed] = per_budget

        non_increasing = sum(
            1
            for seed, vals in results.items()
            if vals[0] >= vals[1] >= vals[2]
        )
        better_than_base = sum(
            1 for vals in results.values() if vals[-1] < base_mpjpe
        )
        detail = (
            f"base {base_mpjpe:.2f} cm; "
            + "; ".join(
                f"seed {s}: " + " -> ".join(f"{v:.2f}" for v in vals)
                for s, vals in results.items()
            )
        )
        assert non_increasing >= 2, f"monotone in only {non_increasing}/3 seeds: {detail}"
        assert better_than_base >= 2, f"beats base in only {better_than_base}/3 seeds: {detail}"
        ok("adaptation trend (budgets 50/200/800)", detail)


# =============================================================================
# Criterion 8: latency and protocol fuzz
# =============================================================================


class TestLatency:
    def test_sustained_ten_fps_under_100ms(self, tmp_path, overfit_model):
        from hriloop.service import ServiceConfig
        from hriloop.service.bench import bench_latency

        model, _, _ = overfit_model  # trained toy model at full n=16, k=8
        config = ServiceConfig(
            tcp_port=0, ws_port=0, retargeter="ik",
            sessions_dir=str(tmp_path / "sessions"), idle_timeout=3600.0,
        )
        report = bench_latency(config, duration=60.0, fps=10.0, model=model)
        assert report.drops == 0, f"{report.drops} accepted frames dropped"
        assert report.frames_received == report.frames_sent
        p95 = report.end_to_end_ms["p95"]
        assert p95 < 100.0, f"p95 {p95:.1f} ms"
        assert report.percentiles_monotone()
        ok(
            "latency at sustained 10 fps for 60 s",
            f"p95 {p95:.1f} ms, {report.frames_received}/{report.frames_sent} frames, 0 drops",
        )

    def test_protocol_fuzz_ten_thousand(self):
        from test_protocol import example_payload

        from hriloop.service import MESSAGE_TYPES, decode_message, encode_message, WireMessage

        rng = np.random.default_rng(31)
        types = list(MESSAGE_TYPES)
        for i in range(10_000):
            mtype = types[int(rng.integers(len(types)))]
            payload = dict(example_payload(mtype))
            if rng.random() < 0.5:
                payload["blob"] = [float(x) for x in rng.normal(0, 10, int(rng.integers(0, 8)))]
            msg = WireMessage(
                type=mtype, payload=payload,
                seq=int(rng.integers(0, 2**31)), ts=float(abs(rng.normal(0, 1e4))),
            )
            assert decode_message(encode_message(msg)) == msg
        ok("protocol round-trip fuzz", "10,000 messages")


# =============================================================================
# Criterion 9: dataset suite on the toy corpus
# =============================================================================


class TestDatasetSuite:
    def test_dataset_invariants(self):
        pairs = synth_interactions(
            ["high-five", "wave", "push", "hug"], 8, seed=37, duration=2.0
        )
        built = build_interhri(pairs, ROBOT, RMAP, vertex_count=32)
        samples = built.samples
        assert len(samples) == 8

        # affordance recompute consistency
        worst = max(affordance_consistency(s, ROBOT) for s in samples)
        assert worst < 1e-9

        # split disjointness
        assert_split_disjoint(samples)

        # derangement of repair negatives
        negs = make_negatives(samples, "repair", seed=41, robot_spec=ROBOT)
        by_id = {s.sample_id: s for s in samples}
        for n in negs:
            orig = by_id[n.sample_id.removesuffix("-neg-repair")]
            assert not np.allclose(n.robot_seq.positions(), orig.robot_seq.positions())

        # noise sigma statistics within 10%
        sigma = 0.1
        deltas = []
        for seed in range(4):
            noisy = make_negatives(samples, "noise", seed=seed, robot_spec=ROBOT, noise_sigma=sigma)
            for n, o in zip(noisy, samples):
                deltas.append(n.robot_seq.positions() - o.robot_seq.positions())
        flat = np.concatenate([d.reshape(-1) for d in deltas])
        assert flat.size >= 10_000
        assert abs(flat.std() - sigma) < 0.1 * sigma
        ok(
            "dataset suite",
            f"affordance recompute {worst:.1e}, derangement clean, "
            f"noise std {flat.std():.4f} vs {sigma}",
        )
