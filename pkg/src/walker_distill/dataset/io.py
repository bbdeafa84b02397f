"""Binary transition file format.

Layout (little-endian)::

    magic "LDDS" | version u32 | obs_dim u32 | act_dim u32 | count u64
    count rows of float32: observation then action

The JSON manifest lives next to the payload as ``<path>.json`` and episode
id / step index columns as ``<path>.episodes.npy``.
"""

import io
import json
import logging
import struct
from collections.abc import Iterator
from pathlib import Path

import numpy as np

from ..checkpoint import atomic_write_bytes, atomic_write_json
from ..errors import (
    BadMagicError,
    DatasetFormatError,
    DimensionMismatchError,
    TruncatedPayloadError,
)
from .schemas import FORMAT_VERSION, DatasetManifest, TransitionBatch

logger = logging.getLogger(__name__)

MAGIC = b"LDDS"
HEADER = struct.Struct("<4sIIIQ")
ROW_DTYPE = np.dtype("<f4")


def manifest_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def episodes_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".episodes.npy")


def encode_payload(batch: TransitionBatch) -> bytes:
    header = HEADER.pack(MAGIC, FORMAT_VERSION, batch.obs_dim, batch.act_dim, len(batch))
    rows = np.concatenate([batch.observations, batch.actions], axis=1).astype(ROW_DTYPE)
    return header + rows.tobytes()


def write_dataset(batch: TransitionBatch, manifest: DatasetManifest, path: str | Path) -> Path:
    path = Path(path)
    if manifest.obs_dim != batch.obs_dim or manifest.act_dim != batch.act_dim:
        raise DimensionMismatchError(
            f"Manifest dims ({manifest.obs_dim}, {manifest.act_dim}) differ from records "
            f"({batch.obs_dim}, {batch.act_dim})"
        )
    if manifest.count != len(batch):
        raise DatasetFormatError(
            f"Manifest count {manifest.count} differs from {len(batch)} records"
        )

    atomic_write_bytes(path, encode_payload(batch))
    buf = io.BytesIO()
    np.save(buf, np.stack([batch.episode_ids, batch.step_indices], axis=1).astype("<i8"))
    atomic_write_bytes(episodes_path(path), buf.getvalue())
    atomic_write_json(manifest_path(path), manifest.model_dump(mode="json"))
    logger.info(f"Wrote {len(batch)} transitions to {path}")
    return path


def read_header(f) -> tuple[int, int, int]:
    raw = f.read(HEADER.size)
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BadMagicError(f"Not a transition dataset (magic {raw[:4]!r})")
    if len(raw) < HEADER.size:
        raise TruncatedPayloadError(f"Header truncated at byte {len(raw)}", offset=len(raw))
    _, version, obs_dim, act_dim, count = HEADER.unpack(raw)
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"Unsupported dataset version {version}")
    return obs_dim, act_dim, count


def read_manifest(path: str | Path) -> DatasetManifest:
    mpath = manifest_path(path)
    if not mpath.exists():
        raise DatasetFormatError(f"Missing dataset manifest {mpath}")
    return DatasetManifest.model_validate(json.loads(mpath.read_text()))


def iter_chunks(
    path: str | Path, chunk_rows: int = 65536
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Stream (observations, actions) blocks of at most ``chunk_rows`` rows."""
    with open(path, "rb") as f:
        obs_dim, act_dim, count = read_header(f)
        width = obs_dim + act_dim
        row_bytes = width * ROW_DTYPE.itemsize
        done = 0
        while done < count:
            rows = min(chunk_rows, count - done)
            raw = f.read(rows * row_bytes)
            if len(raw) < rows * row_bytes:
                complete = done + len(raw) // row_bytes
                offset = HEADER.size + complete * row_bytes
                raise TruncatedPayloadError(
                    f"Payload truncated: record {complete} of {count} incomplete at byte "
                    f"offset {offset}",
                    offset=offset,
                )
            block = np.frombuffer(raw, dtype=ROW_DTYPE).reshape(rows, width)
            yield block[:, :obs_dim].astype(np.float32), block[:, obs_dim:].astype(np.float32)
            done += rows
        if f.read(1):
            raise DatasetFormatError(f"Trailing bytes after {count} records in {path}")


def read_dataset(
    path: str | Path,
    expect_obs_dim: int | None = None,
    expect_act_dim: int | None = None,
    chunk_rows: int = 65536,
) -> tuple[TransitionBatch, DatasetManifest]:
    path = Path(path)
    manifest = read_manifest(path)
    with open(path, "rb") as f:
        obs_dim, act_dim, count = read_header(f)
    if (obs_dim, act_dim) != (manifest.obs_dim, manifest.act_dim):
        raise DimensionMismatchError(
            f"Header dims ({obs_dim}, {act_dim}) differ from manifest "
            f"({manifest.obs_dim}, {manifest.act_dim})"
        )
    for expected, actual, name in (
        (expect_obs_dim, obs_dim, "observation"),
        (expect_act_dim, act_dim, "action"),
    ):
        if expected is not None and expected != actual:
            raise DimensionMismatchError(f"Expected {name} dim {expected}, file has {actual}")
    if count != manifest.count:
        raise DatasetFormatError(f"Header count {count} differs from manifest {manifest.count}")

    obs_blocks, act_blocks = [], []
    for obs, act in iter_chunks(path, chunk_rows):
        obs_blocks.append(obs)
        act_blocks.append(act)
    observations = np.concatenate(obs_blocks) if obs_blocks else np.zeros((0, obs_dim), np.float32)
    actions = np.concatenate(act_blocks) if act_blocks else np.zeros((0, act_dim), np.float32)

    epath = episodes_path(path)
    if not epath.exists():
        raise DatasetFormatError(f"Missing episode index {epath}")
    index = np.load(epath)
    if index.shape != (count, 2):
        raise DatasetFormatError(f"Episode index shape {index.shape} does not match {count} rows")
    batch = TransitionBatch(observations, actions, index[:, 0], index[:, 1])
    return batch, manifest
