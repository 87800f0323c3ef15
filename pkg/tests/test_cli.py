import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from hriloop.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, dispatch


def tree_digest(root: Path) -> str:
    # run manifests carry paths and wall-clock times; the data must not
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def gen_args(out, seed=7, count=4):
    return [
        "gen-data",
        "--out", str(out),
        "--actions", "high-five,wave",
        "--count", str(count),
        "--seed", str(seed),
        "--vertex-count", "32",
        "--duration", "2.0",
    ]


@pytest.fixture(scope="module")
def bench_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "bench"
    assert dispatch(gen_args(out)) == EXIT_OK
    return out


class TestGenData:
    def test_same_seed_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert dispatch(gen_args(a)) == EXIT_OK
        assert dispatch(gen_args(b)) == EXIT_OK
        assert tree_digest(a) == tree_digest(b)

    def test_manifest_written_with_outcome(self, bench_dir):
        manifest = json.loads((bench_dir / "manifest.json").read_text())
        assert manifest["outcome"] == "ok"
        assert manifest["command"] == "gen-data"
        assert manifest["seed"] == 7
        assert manifest["config_hash"]

    def test_unknown_action_fails_at_runtime(self, tmp_path, capsys):
        code = dispatch(gen_args(tmp_path / "x") + ["--actions", "levitate"][0:0])
        assert code == EXIT_OK  # sanity: unmodified args fine
        bad = gen_args(tmp_path / "y")
        bad[bad.index("high-five,wave")] = "levitate"
        assert dispatch(bad) == EXIT_RUNTIME


class TestTrain:
    def test_zero_steps_checkpoint_equals_init(self, bench_dir, tmp_path):
        a = tmp_path / "a.ckpt"
        b = tmp_path / "b.ckpt"
        base = ["train", "--data", str(bench_dir), "--steps", "0", "--preset", "tiny",
                "--seed", "3", "--history", "8", "--horizon", "4"]
        assert dispatch(base + ["--out", str(a)]) == EXIT_OK
        assert dispatch(base + ["--out", str(b)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_training_produces_loadable_checkpoint(self, bench_dir, tmp_path):
        out = tmp_path / "m.ckpt"
        code = dispatch(
            ["train", "--data", str(bench_dir), "--out", str(out), "--steps", "10",
             "--preset", "tiny", "--history", "8", "--horizon", "4"]
        )
        assert code == EXIT_OK
        from hriloop.model import load_checkpoint

        model = load_checkpoint(out)
        assert model.config.vertex_count == 32


class TestEval:
    def test_self_check_reports_zero_error(self, bench_dir, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = dispatch(
            ["eval", "--data", str(bench_dir), "--self-check", "--json", "--out", str(out)]
        )
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        assert report["mpjpe"] == 0.0
        assert report["pa_mpjpe"] == pytest.approx(0.0, abs=1e-9)
        assert report["fid"] == pytest.approx(0.0, abs=1e-6)
        assert report["r_score"] == 1.0

    def test_model_eval_runs(self, bench_dir, tmp_path):
        ckpt = tmp_path / "m.ckpt"
        assert dispatch(
            ["train", "--data", str(bench_dir), "--out", str(ckpt), "--steps", "10",
             "--preset", "tiny", "--history", "8", "--horizon", "4"]
        ) == EXIT_OK
        out = tmp_path / "r.json"
        assert dispatch(
            ["eval", "--data", str(bench_dir), "--checkpoint", str(ckpt),
             "--json", "--out", str(out)]
        ) == EXIT_OK
        report = json.loads(out.read_text())
        assert report["mpjpe"] > 0


class TestUsageErrors:
    def test_unknown_flag_exits_one(self, capsys):
        assert dispatch(["gen-data", "--out", "x", "--warp-speed", "9"]) == EXIT_USAGE
        assert "usage" in capsys.readouterr().err

    def test_unknown_command_exits_one(self):
        assert dispatch(["teleport"]) == EXIT_USAGE

    def test_missing_data_dir_is_runtime_error(self, tmp_path):
        assert dispatch(
            ["train", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "m.ckpt")]
        ) == EXIT_RUNTIME


class TestConfigPrecedence:
    def test_env_overrides_file_flag_overrides_env(self, tmp_path, monkeypatch):
        out = tmp_path / "bench"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"count": 2, "seed": 1}))
        monkeypatch.setenv("HRILOOP_SEED", "5")
        code = dispatch(
            ["gen-data", "--config", str(cfg), "--out", str(out),
             "--actions", "wave", "--vertex-count", "32", "--duration", "2.0",
             "--seed", "9"]
        )
        assert code == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 9  # flag beats env beats file
        assert manifest["config"]["count"] == 2  # file value used, no flag/env

    def test_env_beats_file(self, tmp_path, monkeypatch):
        out = tmp_path / "bench2"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"count": 2, "seed": 1}))
        monkeypatch.setenv("HRILOOP_SEED", "5")
        code = dispatch(
            ["gen-data", "--config", str(cfg), "--out", str(out),
             "--actions", "wave", "--vertex-count", "32", "--duration", "2.0"]
        )
        assert code == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["seed"] == "5"


class TestInspectSession:
    def test_prints_classification(self, tmp_path, capsys):
        from hriloop.service.sessions import SessionRecorder
        from hriloop.skeleton import MotionFrame, RigidTransform

        rec = SessionRecorder(tmp_path / "s.jsonl", "sess-9", "wave", 10.0, "unitree_h1")
        for i in range(3):
            rec.human_frame(MotionFrame(np.zeros((22, 3)), RigidTransform(), i / 10))
            rec.robot_frame(
                MotionFrame(np.zeros((16, 3)), RigidTransform(), i / 10),
                np.zeros((16, 3)),
            )
        rec.feedback(5)
        rec.close()
        assert dispatch(["inspect-session", "--file", str(tmp_path / "s.jsonl")]) == EXIT_OK
        out = capsys.readouterr().out
        assert "classification: positive" in out
        assert "rating: 5" in out


class TestBenchLatency:
    def test_dummy_bench_writes_report(self, tmp_path):
        out = tmp_path / "latency.json"
        code = dispatch(
            ["bench-latency", "--dummy", "--duration", "1.0", "--fps", "10",
             "--retargeter", "zero",
             "--sessions-dir", str(tmp_path / "s"), "--json", "--out", str(out)]
        )
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        assert report["frames_received"] > 0
        assert report["end_to_end_ms"]["p50"] <= report["end_to_end_ms"]["p95"]
