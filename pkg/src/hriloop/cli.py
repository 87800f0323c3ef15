"""Command-line entry point for every workflow.

Config precedence per option: command-line flag > HRILOOP_<NAME> environment
variable > config file (JSON or TOML via --config) > built-in default. The
resolved configuration is printed at startup and hashed into the run
manifest that every run writes on completion.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import subprocess
import sys
import time
from dataclasses import asdict
from pathlib import Path

log = logging.getLogger("hriloop.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

MODEL_PRESETS = {
    "tiny": dict(
        d_low=8, d_mid=8, d_high=8, d_vertex=12, d_model=24, heads=2,
        command_dim=16, vertex_count=32,
    ),
    "default": dict(),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    text = p.read_bytes()
    if p.suffix == ".toml":
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(text.decode("utf-8"))
    return json.loads(text.decode("utf-8"))


def resolve(args: argparse.Namespace, file_config: dict) -> dict:
    """Apply the flag > env > file > default precedence to every option."""
    resolved = {}
    for key, value in vars(args).items():
        if key in ("func", "command", "config"):
            continue
        source = "flag"
        if value is None or (hasattr(args, "_defaults") and False):
            value = None
        if value is None:
            env_key = f"HRILOOP_{key.upper()}"
            if env_key in os.environ:
                value, source = os.environ[env_key], "env"
            elif key in file_config:
                value, source = file_config[key], "file"
        resolved[key] = value
        resolved.setdefault("_sources", {})[key] = source if value is not None else "default"
    resolved.pop("_sources", None)
    return resolved


def config_digest(config: dict) -> str:
    payload = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(payload).hexdigest()


def git_revision() -> str | None:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            capture_output=True, text=True, timeout=5, check=False,
        )
        return out.stdout.strip() or None
    except OSError:
        return None


def write_manifest(
    command: str, config: dict, outcome: str, started: float,
    inputs: list[str], outputs: list[str], path: Path,
) -> None:
    manifest = {
        "command": command,
        "config": config,
        "config_hash": config_digest(config),
        "seed": config.get("seed"),
        "git_revision": git_revision(),
        "inputs": inputs,
        "outputs": outputs,
        "wall_clock_s": round(time.monotonic() - started, 3),
        "outcome": outcome,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, default=str), encoding="utf-8")
    tmp.replace(path)  # atomic on POSIX


def _print_config(command: str, config: dict) -> None:
    print(f"[{command}] resolved configuration:")
    for k in sorted(config):
        print(f"  {k} = {config[k]}")


def _model_config(cfg: dict, vocab: tuple[str, ...]):
    from .model import ModelConfig

    preset = MODEL_PRESETS[cfg.get("preset") or "tiny"]
    return ModelConfig(
        vocab=vocab,
        history=int(cfg.get("history") or 16),
        horizon=int(cfg.get("horizon") or 8),
        seed=int(cfg.get("seed") or 0),
        lr=float(cfg.get("lr") or 1e-3),
        batch_size=int(cfg.get("batch_size") or 8),
        train_steps=int(cfg.get("steps") or 2000),
        lambda_aff=float(cfg.get("lambda_aff") if cfg.get("lambda_aff") is not None else 0.1),
        robot_skeleton=cfg.get("robot") or "unitree_h1",
        **preset,
    )


# -- subcommand implementations ----------------------------------------------


def cmd_gen_data(cfg: dict) -> tuple[list[str], list[str]]:
    from . import assets
    from .data import (
        assert_split_disjoint,
        build_interhri,
        save_benchmark,
        synth_interactions,
        write_pairs,
    )
    from .data.synth import CATALOG
    from .retarget import load_shipped_map

    out = Path(cfg["out"])
    robot = cfg.get("robot") or "unitree_h1"
    actions = (cfg.get("actions") or "").split(",") if cfg.get("actions") else None
    if actions:
        actions = [a.strip() for a in actions if a.strip()]
        unknown = [a for a in actions if a not in CATALOG]
        if unknown:
            raise ValueError(f"unknown actions {unknown}")
    count = int(cfg.get("count") or 8)
    seed = int(cfg.get("seed") or 0)
    fps = float(cfg.get("fps") or 10.0)
    vertex_count = int(cfg.get("vertex_count") or 64)

    pairs = synth_interactions(
        actions, count, seed=seed, duration=float(cfg.get("duration") or 3.0)
    )
    inputs: list[str] = []
    if cfg.get("pairs_out"):
        write_pairs(pairs, cfg["pairs_out"])
    robot_spec = assets.load_skeleton(robot)
    human_spec = assets.load_skeleton("human22")
    rmap = load_shipped_map("human22", robot)
    built = build_interhri(pairs, robot_spec, rmap, fps=fps, vertex_count=vertex_count)
    assert_split_disjoint(built.samples)
    save_benchmark(built.samples, out, human_spec, robot_spec, vertex_count)
    print(
        f"wrote {len(built.samples)} samples to {out} "
        f"({len(built.dropped)} dropped)"
    )
    return inputs, [str(out)]


def cmd_train(cfg: dict) -> tuple[list[str], list[str]]:
    from .data import load_benchmark
    from .model import InteractionModel, save_checkpoint, train

    data_dir = cfg["data"]
    samples, meta = load_benchmark(data_dir)
    train_samples = [s for s in samples if s.split == "train" and not s.negative]
    vocab = tuple(meta["vocab"])
    mconfig = _model_config(cfg, vocab)
    mconfig.vertex_count = int(meta["vertex_count"])
    mconfig.robot_joints = len(meta["robot_skeleton"]["joints"])
    mconfig.human_joints = len(meta["human_skeleton"]["joints"])
    mconfig.robot_skeleton = meta["robot_type"]
    from .skeleton import SkeletonSpec

    robot_spec = SkeletonSpec.from_json_dict(meta["robot_skeleton"])
    mconfig.effector_indices = tuple(robot_spec.end_effector_indices)
    model = InteractionModel(mconfig)
    model, result = train(model, train_samples)
    out = Path(cfg["out"])
    save_checkpoint(model, out, kind="interaction")
    if result.curves["total"]:
        print(
            f"trained {result.steps} steps, loss "
            f"{result.curves['total'][0]:.5f} -> {result.curves['total'][-1]:.5f}"
        )
    (out.parent / (out.stem + ".losses.json")).write_text(
        json.dumps(result.curves), encoding="utf-8"
    )
    return [str(data_dir)], [str(out)]


def cmd_train_retargeter(cfg: dict) -> tuple[list[str], list[str]]:
    from .data import load_benchmark
    from .model import save_checkpoint
    from .retarget import OnlineRetargeter, RetargeterConfig, train_retargeter

    samples, meta = load_benchmark(cfg["data"])
    labeled = [
        (s.robot_seq, s.robot_poses)
        for s in samples
        if s.split == "train" and not s.negative and s.robot_poses
    ]
    rconfig = RetargeterConfig(
        joint_count=len(meta["robot_skeleton"]["joints"]),
        steps=int(cfg.get("steps") or 1500),
        seed=int(cfg.get("seed") or 0),
    )
    model = OnlineRetargeter(rconfig)
    model, stats = train_retargeter(model, labeled)
    out = Path(cfg["out"])
    save_checkpoint(model, out, kind="retargeter")
    if stats.losses:
        print(f"retargeter loss {stats.losses[0]:.5f} -> {stats.losses[-1]:.5f}")
    return [str(cfg["data"])], [str(out)]


def cmd_eval(cfg: dict) -> tuple[list[str], list[str]]:
    from .data import load_benchmark
    from .metrics import MetricsReport, evaluate_predictions, fit_eval_heads
    from .skeleton import SkeletonSpec

    samples, meta = load_benchmark(cfg["data"])
    split = cfg.get("split") or "test"
    chosen = [s for s in samples if s.split == split and not s.negative]
    if not chosen:
        chosen = [s for s in samples if not s.negative]
    robot_spec = SkeletonSpec.from_json_dict(meta["robot_skeleton"])
    seed = int(cfg.get("seed") or 0)
    heads = fit_eval_heads(chosen, robot_spec, seed=seed)

    if cfg.get("self_check"):
        predictions = [s.robot_seq for s in chosen]
        report = evaluate_predictions(predictions, chosen, *heads, seed=seed)
    else:
        from .metrics import rollout_predictions, teacher_forced_predictions
        from .model import load_checkpoint

        model = load_checkpoint(cfg["checkpoint"])
        predict = (
            rollout_predictions if cfg.get("closed_loop") else teacher_forced_predictions
        )
        predictions = predict(model, chosen, robot_spec)
        report = evaluate_predictions(predictions, chosen, *heads, seed=seed)

    outputs = []
    if cfg.get("json"):
        print(report.to_json())
    else:
        print(MetricsReport.table_header())
        print(report.table_row())
    if cfg.get("out"):
        report.save(cfg["out"])
        outputs.append(str(cfg["out"]))
    return [str(cfg["data"])], outputs


def cmd_serve(cfg: dict) -> tuple[list[str], list[str]]:
    import asyncio

    from .service import ServiceConfig, serve

    sconfig = ServiceConfig(
        tcp_host=cfg.get("host") or "127.0.0.1",
        tcp_port=int(cfg.get("tcp_port") or 8750),
        ws_host=cfg.get("host") or "127.0.0.1",
        ws_port=int(cfg.get("ws_port") or 8751),
        checkpoint=cfg.get("checkpoint"),
        retargeter=cfg.get("retargeter") or "ik",
        sessions_dir=cfg.get("sessions_dir") or "sessions",
        recordings_dir=cfg.get("recordings_dir"),
        static_dir=cfg.get("static_dir"),
        dummy_model=bool(cfg.get("dummy")),
        fps=float(cfg.get("fps") or 10.0),
    )

    async def run():
        service = await serve(sconfig)
        print(
            f"tcp://{sconfig.tcp_host}:{service.tcp_port}  "
            f"ws://{sconfig.ws_host}:{service.ws_port}/ws  (Ctrl-C stops)"
        )
        try:
            await asyncio.Event().wait()
        finally:
            await service.stop()

    try:
        asyncio.run(run())
    except KeyboardInterrupt:
        print("stopped")
    return [], [str(sconfig.sessions_dir)]


def cmd_finetune(cfg: dict) -> tuple[list[str], list[str]]:
    from . import assets
    from .adaptation import AdaptationConfig, finetune, load_records, write_lineage
    from .data import load_benchmark
    from .model import load_checkpoint, save_checkpoint
    from .skeleton import SkeletonSpec

    model = load_checkpoint(cfg["checkpoint"])
    samples, meta = load_benchmark(cfg["data"])
    heldout = [s for s in samples if s.split == "test" and not s.negative]
    robot_spec = SkeletonSpec.from_json_dict(meta["robot_skeleton"])
    human_spec = SkeletonSpec.from_json_dict(meta["human_skeleton"])
    records = load_records(cfg["sessions"], human_spec, robot_spec)
    aconfig = AdaptationConfig(
        alpha=float(cfg.get("alpha") if cfg.get("alpha") is not None else 0.1),
        mode=cfg.get("mode") or "margin",
        steps=int(cfg.get("steps") or 300),
        seed=int(cfg.get("seed") or 0),
        sample_budget=int(cfg["budget"]) if cfg.get("budget") else None,
    )
    result = finetune(
        model, records, aconfig, heldout=heldout,
        robot_spec=robot_spec, human_spec=human_spec,
    )
    out = Path(cfg["out"])
    save_checkpoint(result.model, out, kind="interaction")
    write_lineage(out, cfg["checkpoint"], aconfig, cfg["sessions"])
    print("before:", result.before.table_row())
    print("after: ", result.after.table_row())
    return [str(cfg["checkpoint"]), str(cfg["sessions"])], [str(out)]


def cmd_bench_latency(cfg: dict) -> tuple[list[str], list[str]]:
    from .service import ServiceConfig
    from .service.bench import bench_latency

    sconfig = ServiceConfig(
        tcp_port=0,
        ws_port=0,
        checkpoint=cfg.get("checkpoint"),
        retargeter=cfg.get("retargeter") or "ik",
        sessions_dir=cfg.get("sessions_dir") or "bench-sessions",
        dummy_model=bool(cfg.get("dummy")) or not cfg.get("checkpoint"),
        idle_timeout=3600.0,
    )
    report = bench_latency(
        sconfig,
        duration=float(cfg.get("duration") or 10.0),
        fps=float(cfg.get("fps") or 10.0),
    )
    if cfg.get("json"):
        print(report.to_json())
    else:
        e = report.end_to_end_ms
        print(
            f"end-to-end p50 {e['p50']:.2f} ms, p95 {e['p95']:.2f} ms, "
            f"p99 {e['p99']:.2f} ms; drops {report.drops}; "
            f"throughput {report.throughput_fps:.1f} fps"
        )
    outputs = []
    if cfg.get("out"):
        report.save(cfg["out"])
        outputs.append(str(cfg["out"]))
    return [], outputs


def cmd_inspect_session(cfg: dict) -> tuple[list[str], list[str]]:
    from . import assets
    from .adaptation import AdaptationConfig, classify_feedback
    from .service.sessions import read_session_record

    human = assets.load_skeleton(cfg.get("human") or "human22")
    robot = assets.load_skeleton(cfg.get("robot") or "unitree_h1")
    path = Path(cfg["file"])
    record = read_session_record(path, human, robot)
    if record is None:
        print(f"{path.name}: header only, no paired frames")
        return [str(path)], []
    pos, neg, unl = classify_feedback([record], AdaptationConfig())
    bucket = "positive" if pos else "negative" if neg else "unlabeled"
    print(f"session: {record.session_id}")
    print(f"command: {record.command_text}")
    print(f"frames: {len(record.human_seq)}")
    print(f"rating: {record.rating}")
    print(f"classification: {bucket}")
    if record.note:
        print(f"note: {record.note}")
    return [str(path)], []


# -- argument wiring -----------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="hriloop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, configure):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON or TOML config file")
        p.add_argument("--seed", type=int, default=None)
        configure(p)
        p.set_defaults(func=fn)
        return p

    def gen_data(p):
        p.add_argument("--out", required=True)
        p.add_argument("--mode", choices=["synth"], default=None)
        p.add_argument("--actions", default=None, help="comma-separated catalog names")
        p.add_argument("--count", type=int, default=None)
        p.add_argument("--fps", type=float, default=None)
        p.add_argument("--duration", type=float, default=None)
        p.add_argument("--vertex-count", dest="vertex_count", type=int, default=None)
        p.add_argument("--robot", default=None)
        p.add_argument("--pairs-out", dest="pairs_out", default=None)

    def train(p):
        p.add_argument("--data", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--lr", type=float, default=None)
        p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
        p.add_argument("--history", type=int, default=None)
        p.add_argument("--horizon", type=int, default=None)
        p.add_argument("--lambda-aff", dest="lambda_aff", type=float, default=None)
        p.add_argument("--preset", choices=list(MODEL_PRESETS), default=None)
        p.add_argument("--robot", default=None)

    def train_retargeter(p):
        p.add_argument("--data", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--steps", type=int, default=None)

    def eval_(p):
        p.add_argument("--data", required=True)
        p.add_argument("--checkpoint", default=None)
        p.add_argument("--split", default=None)
        p.add_argument("--json", action="store_true", default=None)
        p.add_argument("--out", default=None)
        p.add_argument(
            "--self-check", dest="self_check", action="store_true", default=None,
            help="score ground truth against itself (pipeline sanity)",
        )
        p.add_argument(
            "--closed-loop", dest="closed_loop", action="store_true", default=None,
            help="score full receding-horizon rollouts instead of one-step predictions",
        )

    def serve_(p):
        p.add_argument("--checkpoint", default=None)
        p.add_argument("--dummy", action="store_true", default=None)
        p.add_argument("--host", default=None)
        p.add_argument("--tcp-port", dest="tcp_port", type=int, default=None)
        p.add_argument("--ws-port", dest="ws_port", type=int, default=None)
        p.add_argument("--sessions-dir", dest="sessions_dir", default=None)
        p.add_argument("--recordings-dir", dest="recordings_dir", default=None)
        p.add_argument("--static-dir", dest="static_dir", default=None)
        p.add_argument("--retargeter", default=None)
        p.add_argument("--fps", type=float, default=None)

    def finetune_(p):
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--sessions", required=True)
        p.add_argument("--data", required=True, help="benchmark dir for held-out eval")
        p.add_argument("--out", required=True)
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--mode", choices=["raw", "margin"], default=None)
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--budget", type=int, default=None)

    def bench(p):
        p.add_argument("--checkpoint", default=None)
        p.add_argument("--dummy", action="store_true", default=None)
        p.add_argument("--duration", type=float, default=None)
        p.add_argument("--fps", type=float, default=None)
        p.add_argument("--retargeter", default=None)
        p.add_argument("--sessions-dir", dest="sessions_dir", default=None)
        p.add_argument("--json", action="store_true", default=None)
        p.add_argument("--out", default=None)

    def inspect(p):
        p.add_argument("--file", required=True)
        p.add_argument("--human", default=None)
        p.add_argument("--robot", default=None)

    add("gen-data", cmd_gen_data, gen_data)
    add("train", cmd_train, train)
    add("train-retargeter", cmd_train_retargeter, train_retargeter)
    add("eval", cmd_eval, eval_)
    add("serve", cmd_serve, serve_)
    add("finetune", cmd_finetune, finetune_)
    add("bench-latency", cmd_bench_latency, bench)
    add("inspect-session", cmd_inspect_session, inspect)
    return parser


def _manifest_path(command: str, cfg: dict) -> Path:
    out = cfg.get("out")
    if out:
        p = Path(out)
        if p.suffix:  # file output: manifest sits next to it
            return p.parent / f"{p.stem}.manifest.json"
        return p / "manifest.json"
    return Path(f"{command.replace('-', '_')}.manifest.json")


def dispatch(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code if e.code is not None else EXIT_USAGE)
    file_config = {}
    try:
        file_config = _load_config_file(args.config)
    except (OSError, ValueError) as e:
        print(f"error: cannot read config file: {e}", file=sys.stderr)
        return EXIT_USAGE
    cfg = resolve(args, file_config)
    command = args.command
    _print_config(command, cfg)
    started = time.monotonic()
    manifest = _manifest_path(command, cfg)
    try:
        inputs, outputs = args.func(cfg)
    except KeyboardInterrupt:
        write_manifest(command, cfg, "interrupted", started, [], [], manifest)
        return EXIT_RUNTIME
    except Exception as e:  # noqa: BLE001 - single CLI failure funnel
        log.error("%s failed: %s", command, e)
        write_manifest(command, cfg, f"error: {e}", started, [], [], manifest)
        return EXIT_RUNTIME
    write_manifest(command, cfg, "ok", started, inputs, outputs, manifest)
    return EXIT_OK


def main() -> None:
    raise SystemExit(dispatch())


if __name__ == "__main__":
    main()
