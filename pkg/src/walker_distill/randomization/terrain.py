"""Procedural heightfields."""

import numpy as np
from scipy.ndimage import gaussian_filter1d

from ..errors import InvalidArgumentError
from ..sim.schemas import Terrain, TerrainKind
from .schemas import TerrainParams


def _spawn_mask(xs: np.ndarray, params: TerrainParams) -> np.ndarray:
    return np.abs(xs) <= params.spawn_clearance


def _bumpy(rng: np.random.Generator, xs: np.ndarray, params: TerrainParams) -> np.ndarray:
    noise = gaussian_filter1d(rng.uniform(-1.0, 1.0, len(xs)), params.smoothing, mode="nearest")
    peak = np.max(np.abs(noise))
    heights = noise * (params.amplitude / peak) if peak > 0 else np.zeros_like(noise)
    # Fade to zero over one metre around the spawn area.
    ramp = np.clip((np.abs(xs) - params.spawn_clearance) / 1.0, 0.0, 1.0)
    return heights * ramp


def _obstacles(rng: np.random.Generator, xs: np.ndarray, params: TerrainParams) -> np.ndarray:
    heights = np.zeros_like(xs)
    # Steps start past the spawn area in both directions.
    for sign in (1.0, -1.0):
        edge = params.spawn_clearance
        limit = np.max(np.abs(xs))
        while edge < limit:
            length = rng.uniform(params.min_step_length, params.max_step_length)
            level = rng.uniform(0.0, params.step_height)
            start, stop = edge, edge + length
            heights[(sign * xs >= start) & (sign * xs < stop)] = level
            edge = stop
    heights[_spawn_mask(xs, params)] = 0.0
    return heights


def generate_terrain(
    rng: np.random.Generator,
    kind: TerrainKind | str,
    params: TerrainParams | None = None,
    friction: float = 1.0,
) -> Terrain:
    params = params or TerrainParams()
    try:
        kind = TerrainKind(kind)
    except ValueError as exc:
        raise InvalidArgumentError(f"Unknown terrain kind: {kind!r}") from exc

    n = int(round(params.length / params.spacing)) + 1
    xs = params.origin + params.spacing * np.arange(n)
    if kind == TerrainKind.FLAT:
        heights = np.zeros(n)
    elif kind == TerrainKind.BUMPY:
        heights = _bumpy(rng, xs, params)
    else:
        heights = _obstacles(rng, xs, params)
    return Terrain(kind, heights, params.spacing, friction, params.origin)
