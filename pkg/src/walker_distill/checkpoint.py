"""Checkpoint persistence: safetensors weights plus a JSON manifest sidecar.

Every file is written to a temporary sibling first and moved into place with
``os.replace`` so an interrupted write never leaves a half-written artifact.
"""

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any

import torch
from safetensors.torch import load_file, save_file

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

WEIGHTS_NAME = "weights.safetensors"
MANIFEST_NAME = "manifest.json"


def _atomic_target(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    return Path(tmp)


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    tmp = _atomic_target(path)
    try:
        tmp.write_bytes(data)
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)


def atomic_write_json(path: str | Path, payload: Any) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    atomic_write_bytes(path, text.encode("utf-8"))


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def flatten_state(groups: dict[str, dict[str, torch.Tensor]]) -> dict[str, torch.Tensor]:
    """Prefix each module's state dict with its group name ("policy.net.0.weight")."""
    flat = {}
    for group, state in groups.items():
        for key, tensor in state.items():
            flat[f"{group}.{key}"] = tensor.detach().cpu().contiguous()
    return flat


def unflatten_state(flat: dict[str, torch.Tensor]) -> dict[str, dict[str, torch.Tensor]]:
    groups: dict[str, dict[str, torch.Tensor]] = {}
    for key, tensor in flat.items():
        group, _, rest = key.partition(".")
        groups.setdefault(group, {})[rest] = tensor
    return groups


def save_checkpoint(
    directory: str | Path,
    groups: dict[str, dict[str, torch.Tensor]],
    manifest: dict[str, Any],
) -> Path:
    """Write weights and manifest into ``directory``. Returns the weights path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    weights_path = directory / WEIGHTS_NAME

    tmp = _atomic_target(weights_path)
    try:
        save_file(flatten_state(groups), str(tmp))
        os.replace(tmp, weights_path)
    finally:
        tmp.unlink(missing_ok=True)

    manifest = dict(manifest)
    manifest["weights_sha256"] = file_sha256(weights_path)
    atomic_write_json(directory / MANIFEST_NAME, manifest)
    logger.info(f"Saved checkpoint to {directory} ({manifest.get('kind', 'unknown')})")
    return weights_path


def read_manifest(directory: str | Path) -> dict[str, Any]:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise ConfigurationError(f"No checkpoint manifest at {path}")
    return json.loads(path.read_text())


def load_checkpoint(
    directory: str | Path, expected_kind: str | None = None
) -> tuple[dict[str, dict[str, torch.Tensor]], dict[str, Any]]:
    directory = Path(directory)
    manifest = read_manifest(directory)
    if expected_kind is not None and manifest.get("kind") != expected_kind:
        raise ConfigurationError(
            f"Checkpoint {directory} is a {manifest.get('kind')!r}, expected {expected_kind!r}"
        )
    flat = load_file(str(directory / WEIGHTS_NAME))
    return unflatten_state(flat), manifest
