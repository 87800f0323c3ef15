"""Checkpoint archive: a zip with a config JSON (mandatory version field)
plus named parameter arrays. Torch-free on disk, so checkpoints stay
inspectable with nothing but the standard library and numpy."""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np
import torch

from ..errors import DataFormatError

FORMAT_VERSION = 1


def save_checkpoint(model: torch.nn.Module, path: str | Path, kind: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    config = model.config
    config_dict = (
        config.to_json_dict() if hasattr(config, "to_json_dict") else config.__dict__
    )
    meta = {"format_version": FORMAT_VERSION, "kind": kind, "config": config_dict}
    arrays = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    # fixed archive timestamps keep identical weights byte-identical on disk
    # (np.savez would embed wall-clock times, so arrays are stored one by one)
    epoch = (1980, 1, 1, 0, 0, 0)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as z:
        z.writestr(zipfile.ZipInfo("config.json", epoch), json.dumps(meta, indent=2))
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.save(buf, arrays[name])
            z.writestr(zipfile.ZipInfo(f"params/{name}.npy", epoch), buf.getvalue())
    return path


def read_checkpoint_meta(path: str | Path) -> dict:
    with zipfile.ZipFile(path, "r") as z:
        meta = json.loads(z.read("config.json"))
    if "format_version" not in meta:
        raise DataFormatError(f"{path}: checkpoint missing format_version")
    if meta["format_version"] > FORMAT_VERSION:
        raise DataFormatError(
            f"{path}: checkpoint version {meta['format_version']} is newer "
            f"than supported {FORMAT_VERSION}"
        )
    return meta


def _load_arrays(path: str | Path) -> dict[str, np.ndarray]:
    out = {}
    with zipfile.ZipFile(path, "r") as z:
        for info in z.infolist():
            if info.filename.startswith("params/") and info.filename.endswith(".npy"):
                name = info.filename[len("params/") : -len(".npy")]
                out[name] = np.load(io.BytesIO(z.read(info)))
        if not out and "params.npz" in z.namelist():  # older archives
            npz = np.load(io.BytesIO(z.read("params.npz")))
            out = {k: npz[k] for k in npz.files}
    return out


def load_checkpoint(path: str | Path) -> torch.nn.Module:
    """Rebuild a model of the checkpoint's declared kind."""
    meta = read_checkpoint_meta(path)
    kind = meta.get("kind")
    if kind == "interaction":
        from .config import ModelConfig
        from .network import InteractionModel

        model = InteractionModel(ModelConfig.from_json_dict(meta["config"]))
    elif kind == "retargeter":
        from ..retarget.online import OnlineRetargeter, RetargeterConfig

        model = OnlineRetargeter(RetargeterConfig(**meta["config"]))
    else:
        raise DataFormatError(f"{path}: unknown checkpoint kind {kind!r}")
    arrays = _load_arrays(path)
    state = {k: torch.from_numpy(v) for k, v in arrays.items()}
    model.load_state_dict(state)
    model.eval()
    return model
