import numpy as np
import pytest

from hriloop.metrics import (
    ContactMetrics,
    EmbedderConfig,
    ExtractorConfig,
    contact_from_labels,
    contact_metrics,
    fid,
    mpjpe,
    orie_error,
    pa_mpjpe,
    pa_mpjpe_frames,
    r_score,
    train_feature_extractor,
    train_joint_embedder,
)
from hriloop.model.command import Vocabulary
from hriloop.rotations import angle_axis_to_matrix, quat_normalize
from hriloop.skeleton import (
    MotionFrame,
    MotionSequence,
    RigidTransform,
    sequence_from_positions,
)
from hriloop.surface import SurfaceProxy, build_binding


def random_sequence(spec, rng, frames=6, fps=10.0, root_offsets=None):
    positions = rng.normal(0, 0.5, (frames, spec.joint_count, 3))
    roots = None
    if root_offsets is not None:
        roots = [RigidTransform(translation=np.asarray(o, float)) for o in root_offsets]
    return sequence_from_positions(spec, positions, fps, roots)


class TestMpjpe:
    def test_zero_when_equal(self, unitree_h1, rng):
        seq = random_sequence(unitree_h1, rng)
        assert mpjpe(seq, seq) == 0.0

    def test_uniform_offset_forces_value(self, unitree_h1, rng):
        gt = random_sequence(unitree_h1, rng)
        moved = sequence_from_positions(
            unitree_h1, gt.positions() + np.array([0.03, 0, 0]), gt.fps
        )
        assert abs(mpjpe(moved, gt) - 3.0) < 1e-9

    def test_matches_naive_double_loop(self, rng):
        from hriloop.skeleton import Joint, SkeletonSpec

        wide = np.full(3, 10.0)
        spec = SkeletonSpec(
            "tiny",
            (
                Joint("a", None, np.zeros(3), -wide, wide),
                Joint("b", 0, np.ones(3), -wide, wide),
                Joint("c", 1, np.ones(3), -wide, wide),
            ),
            (),
        )
        pred = random_sequence(spec, rng, frames=2)
        gt = random_sequence(spec, rng, frames=2)
        total, count = 0.0, 0
        for pf, gf in zip(pred.frames, gt.frames):
            for j in range(3):
                total += np.sqrt(
                    np.sum((pf.joint_positions[j] - gf.joint_positions[j]) ** 2)
                )
                count += 1
        assert abs(mpjpe(pred, gt) - 100.0 * total / count) < 1e-9


class TestPaMpjpe:
    def test_zero_under_similarity_transform(self, unitree_h1, rng):
        gt = random_sequence(unitree_h1, rng)
        rot = angle_axis_to_matrix(np.array([0.2, 0.4, -0.3]))
        pred_pos = 1.7 * gt.positions() @ rot.T + np.array([1.0, 2.0, 3.0])
        pred = sequence_from_positions(unitree_h1, pred_pos, gt.fps)
        assert pa_mpjpe(pred, gt) < 1e-6

    def test_never_worse_than_mpjpe(self, unitree_h1, rng):
        for _ in range(25):
            pred = random_sequence(unitree_h1, rng)
            gt = random_sequence(unitree_h1, rng)
            assert pa_mpjpe(pred, gt) <= mpjpe(pred, gt) + 1e-9

    def test_matches_direct_numerical_minimization(self, unitree_h1):
        from test_geometry import brute_force_similarity_residual

        rng = np.random.default_rng(5)
        pred = random_sequence(unitree_h1, rng, frames=2)
        gt = random_sequence(unitree_h1, rng, frames=2)
        errors, skipped = pa_mpjpe_frames(pred, gt)
        assert skipped == 0
        # The oracle minimizes RMS; per-frame mean-abs error after the same
        # optimal transform is what pa reports. Re-derive it from the oracle
        # transform by optimizing, then compare alignment quality via RMS.
        for pf, gf, err in zip(pred.frames, gt.frames, errors):
            oracle_rms = brute_force_similarity_residual(
                pf.joint_positions, gf.joint_positions, seed=1
            )
            from hriloop.geometry import procrustes_align

            _, ours_rms = procrustes_align(pf.joint_positions, gf.joint_positions)
            assert abs(ours_rms - oracle_rms) < 1e-4


class TestTrajOrie:
    def test_identity_is_zero(self, unitree_h1, rng):
        seq = random_sequence(unitree_h1, rng, root_offsets=np.zeros((6, 3)))
        assert orie_error(seq, seq) == 0.0
        from hriloop.metrics import traj_error

        assert traj_error(seq, seq) == 0.0

    def test_constant_offset_in_cm(self, unitree_h1, rng):
        from hriloop.metrics import traj_error

        gt = random_sequence(unitree_h1, rng, root_offsets=np.zeros((6, 3)))
        pred = random_sequence(
            unitree_h1, rng, root_offsets=np.tile([0.1, 0, 0], (6, 1))
        )
        assert abs(traj_error(pred, gt) - 10.0) < 1e-9

    def test_constant_yaw_in_degrees(self, unitree_h1, rng):
        gt = random_sequence(unitree_h1, rng)
        yaw = np.radians(30.0)
        q = np.array([np.cos(yaw / 2), 0, np.sin(yaw / 2), 0])
        frames = tuple(
            MotionFrame(f.joint_positions, RigidTransform(rotation=q), f.timestamp)
            for f in gt.frames
        )
        pred = MotionSequence(unitree_h1, frames, gt.fps)
        assert abs(orie_error(pred, gt) - 30.0) < 1e-9


def surfaces_at(points, human22, count):
    binding = build_binding(human22, count)
    verts = np.tile(points, (count // len(points) + 1, 1))[:count]
    return SurfaceProxy(verts, binding)


class TestContactMetrics:
    def test_perfect_prediction_when_both_classes_present(self):
        gt = np.array([[True], [False], [True], [False]])
        m = contact_from_labels(gt, gt)
        assert m.as_tuple() == (1.0, 1.0, 1.0, 1.0)
        assert not m.degenerate

    def test_enumerated_half_overlap_case(self):
        # gt contact frames {1,2}, predicted {2,3}: TP=1 FP=1 FN=1 TN=1.
        gt = np.array([[False], [True], [True], [False]])
        pred = np.array([[False], [False], [True], [True]])
        m = contact_from_labels(pred, gt)
        assert m.as_tuple() == (0.5, 0.5, 0.5, 0.5)
        assert (m.tp, m.fp, m.fn, m.tn) == (1, 1, 1, 1)

    def test_no_contacts_anywhere_reports_one_with_flag(self):
        empty = np.zeros((4, 2), dtype=bool)
        m = contact_from_labels(empty, empty)
        assert m.recall == 1.0 and m.degenerate["recall"]
        assert m.precision == 1.0 and m.degenerate["precision"]
        assert m.accuracy == 1.0

    def test_matches_naive_double_loop(self, rng):
        for _ in range(20):
            gt = rng.random((5, 2)) < 0.5
            pred = rng.random((5, 2)) < 0.5
            m = contact_from_labels(pred, gt)
            tp = fp = fn = tn = 0
            for t in range(5):
                for e in range(2):
                    if pred[t, e] and gt[t, e]:
                        tp += 1
                    elif pred[t, e] and not gt[t, e]:
                        fp += 1
                    elif not pred[t, e] and gt[t, e]:
                        fn += 1
                    else:
                        tn += 1
            prec = tp / (tp + fp) if tp + fp else 1.0
            rec = tp / (tp + fn) if tp + fn else 1.0
            acc = (tp + tn) / (tp + fp + fn + tn)
            f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
            assert abs(m.precision - prec) < 1e-12
            assert abs(m.recall - rec) < 1e-12
            assert abs(m.accuracy - acc) < 1e-12
            assert abs(m.f1 - f1) < 1e-12

    def test_distance_thresholding(self, unitree_h1, human22):
        from hriloop.skeleton import forward_kinematics, rest_pose

        rest = forward_kinematics(unitree_h1, rest_pose(unitree_h1))
        seq = sequence_from_positions(
            unitree_h1, np.stack([rest.joint_positions]), 10.0
        )
        wrist = rest.joint_positions[unitree_h1.joint_index("left_wrist")]
        near = surfaces_at(np.array([wrist + [0.01, 0, 0]]), human22, 22)
        m = contact_metrics(seq, seq, [near], tau=0.05)
        assert m.tp >= 1

    def test_empty_surface_rejected(self, unitree_h1, rng):
        seq = random_sequence(unitree_h1, rng, frames=1)
        from hriloop.errors import ShapeError

        with pytest.raises(ShapeError):
            contact_metrics(seq, seq, [], tau=0.05)


class TestFrameOrderInvariance:
    def test_metrics_invariant_to_common_shuffle(self, unitree_h1, rng):
        from hriloop.metrics import traj_error

        pred = random_sequence(unitree_h1, rng, frames=8)
        gt = random_sequence(unitree_h1, rng, frames=8)
        perm = rng.permutation(8)

        def shuffled(seq):
            pos = seq.positions()[perm]
            roots = [seq.frames[int(i)].root for i in perm]
            return sequence_from_positions(unitree_h1, pos, seq.fps, roots)

        sp, sg = shuffled(pred), shuffled(gt)
        assert abs(mpjpe(pred, gt) - mpjpe(sp, sg)) < 1e-12
        assert abs(traj_error(pred, gt) - traj_error(sp, sg)) < 1e-12
        assert abs(orie_error(pred, gt) - orie_error(sp, sg)) < 1e-12
        assert abs(pa_mpjpe(pred, gt) - pa_mpjpe(sp, sg)) < 1e-12


class TestFid:
    def test_identical_sets_give_zero(self, rng):
        feats = rng.normal(0, 1, (64, 8))
        assert abs(fid(feats, feats)) < 1e-6

    def test_mean_shift_with_equal_covariance(self, rng):
        a = rng.normal(0, 1, (128, 6))
        d = np.array([1.0, -2.0, 0.5, 0.0, 3.0, -1.0])
        b = a + d
        assert abs(fid(a, b) - np.sum(d**2)) < 1e-9

    def test_two_dimensional_diagonal_closed_form(self):
        # Four-point square: sample mean (1,1), diagonal sample covariance.
        a = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]])
        scale = np.array([2.0, 3.0])
        shift = np.array([5.0, -1.0])
        b = a * scale + shift
        mu_a, mu_b = a.mean(0), b.mean(0)
        var_a = a.var(0, ddof=1)
        var_b = b.var(0, ddof=1)
        expected = np.sum((mu_a - mu_b) ** 2) + np.sum(
            (np.sqrt(var_a) - np.sqrt(var_b)) ** 2
        )
        assert abs(fid(a, b) - expected) < 1e-9

    def test_symmetry_and_nonnegativity(self, rng):
        for _ in range(5):
            a = rng.normal(0, 1, (40, 5))
            b = rng.normal(0.5, 2, (40, 5))
            ab, ba = fid(a, b), fid(b, a)
            assert abs(ab - ba) < 1e-9
            assert ab >= -1e-6

    def test_feature_extractor_trains_and_has_declared_dim(self, unitree_h1, rng):
        seqs = [random_sequence(unitree_h1, rng, frames=9) for _ in range(6)]
        cfg = ExtractorConfig(joint_count=unitree_h1.joint_count, feature_dim=11, steps=80)
        model, losses = train_feature_extractor(seqs, cfg)
        assert losses[-1] < losses[0]
        feats = model.features(seqs)
        assert feats.shape == (6, 11)

    def test_feature_extractor_deterministic(self, unitree_h1, rng):
        seqs = [random_sequence(unitree_h1, rng, frames=9) for _ in range(4)]
        cfg = ExtractorConfig(joint_count=unitree_h1.joint_count, steps=40)
        a, _ = train_feature_extractor(seqs, cfg)
        b, _ = train_feature_extractor(seqs, cfg)
        np.testing.assert_array_equal(a.features(seqs), b.features(seqs))


class TestRScore:
    def test_oracle_embedder_scores_one(self, unitree_h1, rng):
        texts = [f"act-{i}" for i in range(10)]
        table = {t: rng.normal(0, 1, 4) for t in texts}
        samples = [(t, random_sequence(unitree_h1, rng, frames=4)) for t in texts]
        motion_of = {id(s): table[t] for t, s in samples}
        score = r_score(
            samples,
            text_emb=lambda t: table[t],
            motion_emb=lambda s: motion_of[id(s)],
            pool_size=32,
        )
        assert score == 1.0

    def test_pool_of_three_with_oracle(self, unitree_h1, rng):
        texts = [f"act-{i}" for i in range(6)]
        table = {t: rng.normal(0, 1, 4) for t in texts}
        samples = [(t, random_sequence(unitree_h1, rng, frames=4)) for t in texts]
        motion_of = {id(s): table[t] for t, s in samples}
        score = r_score(
            samples,
            text_emb=lambda t: table[t],
            motion_emb=lambda s: motion_of[id(s)],
            pool_size=3,
        )
        assert score == 1.0

    def test_random_embedder_near_three_over_pool(self, unitree_h1, rng):
        # Quick sanity at N=2000; the full 1e4 Monte Carlo runs in acceptance.
        n = 2000
        seq = random_sequence(unitree_h1, rng, frames=4)
        samples = [(f"t{i:05d}", seq) for i in range(n)]
        vecs = {t: np.random.default_rng(i).normal(0, 1, 6) for i, (t, _) in enumerate(samples)}
        score = r_score(
            samples,
            text_emb=lambda t: vecs[t],
            motion_emb=lambda s: np.zeros(6),
            pool_size=32,
            seed=3,
        )
        assert abs(score - 3 / 32) < 0.05

    def test_joint_embedder_learns_toy_alignment(self, unitree_h1, rng):
        vocab = Vocabulary(("alpha", "beta"))
        seq_a = [random_sequence(unitree_h1, rng, frames=6) for _ in range(4)]
        seq_b = [
            sequence_from_positions(unitree_h1, s.positions() + 5.0, s.fps)
            for s in seq_a
        ]
        pairs = [("alpha", s) for s in seq_a] + [("beta", s) for s in seq_b]
        cfg = EmbedderConfig(joint_count=unitree_h1.joint_count, steps=200, seed=1)
        model, losses = train_joint_embedder(pairs, vocab, cfg)
        assert losses[-1] < losses[0]
        score = r_score(
            pairs, model.embed_text, model.embed_motion, pool_size=2, seed=0
        )
        assert score == 1.0
