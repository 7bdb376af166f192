"""Checkpoint archive: raw little-endian float32 arrays plus a JSON manifest.

The manifest records the network kind, layer names and shapes, the training
step, and a hash of the network config; loading validates all of them so a
checkpoint can never silently attach to the wrong architecture.
"""

from __future__ import annotations

import json
import zipfile
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from ..errors import CheckpointError, ConfigHashMismatchError
from .config import NetConfig
from .discriminators import ConditionalDiscriminator, LocalDiscriminator, MaskCropDiscriminator
from .generators import BackgroundGenerator, ForegroundGenerator, MaskGenerator

__all__ = ["save_checkpoint", "load_checkpoint", "load_net", "read_manifest", "NET_KINDS"]

FORMAT = "layercomp-ckpt-1"

NET_KINDS = {
    "bg": BackgroundGenerator,
    "fg": ForegroundGenerator,
    "maskgen": MaskGenerator,
    "disc_global": ConditionalDiscriminator,
    "disc_local": LocalDiscriminator,
    "disc_mask": MaskCropDiscriminator,
}


def save_checkpoint(path: str | Path, module: nn.Module, kind: str, step: int) -> None:
    if kind not in NET_KINDS:
        raise CheckpointError(f"unknown network kind {kind!r}")
    cfg: NetConfig = module.cfg
    state = module.state_dict()
    arrays = []
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for name, tensor in state.items():
            if tensor.dtype != torch.float32:
                raise CheckpointError(f"{name}: only float32 tensors are stored")
            arr = tensor.detach().cpu().numpy()
            arrays.append({"name": name, "shape": list(arr.shape)})
            zf.writestr(f"arrays/{name}.bin", arr.astype("<f4").tobytes())
        manifest = {
            "format": FORMAT,
            "kind": kind,
            "step": int(step),
            "config": cfg.to_dict(),
            "config_hash": cfg.hash(),
            "arrays": arrays,
        }
        zf.writestr("manifest.json", json.dumps(manifest, indent=1, sort_keys=True))


def read_manifest(path: str | Path) -> dict:
    try:
        with zipfile.ZipFile(path) as zf:
            return json.loads(zf.read("manifest.json"))
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, OSError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc


def load_checkpoint(path: str | Path, module: nn.Module) -> int:
    """Load weights into an already-constructed module; returns the step."""
    manifest = read_manifest(path)
    if manifest.get("format") != FORMAT:
        raise CheckpointError(f"unknown checkpoint format {manifest.get('format')!r}")
    if manifest["config_hash"] != module.cfg.hash():
        raise ConfigHashMismatchError(
            f"checkpoint config hash {manifest['config_hash']} does not match "
            f"module config hash {module.cfg.hash()}"
        )
    expected_kind = {cls: kind for kind, cls in NET_KINDS.items()}.get(type(module))
    if expected_kind is not None and manifest.get("kind") != expected_kind:
        raise CheckpointError(
            f"checkpoint holds {manifest.get('kind')!r} weights, module is {expected_kind!r}"
        )
    listed = {entry["name"]: tuple(entry["shape"]) for entry in manifest["arrays"]}
    state = module.state_dict()
    if set(listed) != set(state):
        missing = sorted(set(state) - set(listed))
        extra = sorted(set(listed) - set(state))
        raise CheckpointError(f"array name mismatch: missing={missing} extra={extra}")
    new_state = {}
    with zipfile.ZipFile(path) as zf:
        for name, tensor in state.items():
            shape = listed[name]
            if tuple(tensor.shape) != shape:
                raise CheckpointError(
                    f"{name}: manifest shape {shape} != module shape {tuple(tensor.shape)}"
                )
            try:
                raw = zf.read(f"arrays/{name}.bin")
            except KeyError as exc:
                raise CheckpointError(f"{name}: listed in manifest but absent "
                                      f"from archive") from exc
            n = int(np.prod(shape)) if shape else 1
            if len(raw) != 4 * n:
                raise CheckpointError(f"{name}: payload size {len(raw)} != {4 * n}")
            arr = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
            new_state[name] = torch.from_numpy(arr)
    module.load_state_dict(new_state)
    return int(manifest["step"])


def load_net(path: str | Path) -> tuple[nn.Module, int, str]:
    """Construct the right network from the manifest and load it."""
    manifest = read_manifest(path)
    kind = manifest.get("kind")
    if kind not in NET_KINDS:
        raise CheckpointError(f"unknown network kind {kind!r} in {path}")
    cfg = NetConfig.from_dict(manifest["config"])
    module = NET_KINDS[kind](cfg)
    step = load_checkpoint(path, module)
    return module, step, kind
