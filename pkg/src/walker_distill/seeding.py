"""Seed derivation and deterministic module construction."""

import hashlib
import json
import threading
from collections.abc import Iterator
from contextlib import contextmanager
from typing import Any

import numpy as np
import torch

_INIT_LOCK = threading.Lock()


def derive_seed(master: int, *keys: Any) -> int:
    """Hash a master seed and a key path into an independent 31-bit seed.

    Seeds depend only on their own key path, so adding stages or setups never
    shifts the seeds of existing ones.
    """
    material = "/".join([str(master), *(str(k) for k in keys)])
    digest = hashlib.sha256(material.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % (2**31 - 1)


def numpy_rng(seed: int, *keys: Any) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys) if keys else seed)


def torch_generator(seed: int) -> torch.Generator:
    g = torch.Generator(device="cpu")
    g.manual_seed(seed)
    return g


@contextmanager
def seeded_init(seed: int) -> Iterator[None]:
    """Construct torch modules from ``seed`` without racing other threads.

    Parameter initializers draw from the global torch RNG, so construction is
    serialized and the global state is restored afterwards.
    """
    with _INIT_LOCK:
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            yield


def config_hash(payload: Any) -> str:
    """SHA-256 of a canonical JSON dump (sorted keys, no whitespace)."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
