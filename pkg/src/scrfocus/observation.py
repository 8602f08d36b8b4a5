"""Synthetic dense-descriptor model standing in for a pretrained backbone.

Mapped points carry unique repeatable descriptors; everything else shows one
of a small pool of ambiguous background appearances.  A pixel's descriptor is
keyed by its (image, grid cell), so re-querying a cell is deterministic and
buffer construction order does not matter:

- if a tracked point's observed pixel lies within ``r_feat`` of the cell
  center, the cell shows that point's latent descriptor (nearest point wins);
- otherwise it shows ``pool[hash(image, cell) % pool_size]``, which repeats
  across geometrically inconsistent locations by design;
- cell-keyed Gaussian noise of scale ``noise_sigma`` is added and the result
  renormalized (skipped entirely at sigma == 0 so the clean case is exact).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import OutOfFrame

_TAG_NOISE = 1
_TAG_POOL = 2
_TAG_LATENT = 3
_TAG_POOLVEC = 4
_TAG_RESALT = 16

SEPARABILITY_MAX_DOT = 0.9


def _unit_rows(m: np.ndarray) -> np.ndarray:
    return m / np.linalg.norm(m, axis=1, keepdims=True)


@dataclass(frozen=True)
class ObservationWorld:
    """Latent appearance state for one map: per-point descriptors plus the
    shared ambiguous background pool."""

    seed: int
    descriptor_dim: int
    noise_sigma: float
    r_feat: float
    stride: int
    point_ids: np.ndarray  # (P,), aligned with latents rows
    latents: np.ndarray  # (P, D) unit rows
    pool: np.ndarray  # (M, D) unit rows

    @classmethod
    def for_map(cls, scene, seed, descriptor_dim=32, noise_sigma=0.1, pool_size=48, r_feat=3.0, stride=1):
        """Deterministically derive a world from a map and a seed.

        Latent and pool vectors are resampled (deterministically) until all
        pairwise dot products stay below SEPARABILITY_MAX_DOT.
        """
        if noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        point_ids = np.array([p.id for p in scene.points], dtype=np.int64)
        lat = _unit_rows(_kernels.keyed_normals(_kernels.stream_keys(seed, _TAG_LATENT, point_ids), descriptor_dim)) if len(point_ids) else np.zeros((0, descriptor_dim))
        pool = _unit_rows(
            _kernels.keyed_normals(
                _kernels.stream_keys(seed, _TAG_POOLVEC, np.arange(pool_size, dtype=np.int64)),
                descriptor_dim,
            )
        )
        vecs = np.vstack([lat, pool])
        salts = np.zeros(vecs.shape[0], dtype=np.int64)
        while True:
            gram = vecs @ vecs.T
            np.fill_diagonal(gram, 0.0)
            bad = np.argwhere(gram >= SEPARABILITY_MAX_DOT)
            if bad.size == 0:
                break
            j = int(max(bad[0]))  # resample the higher-index member of the first offending pair
            salts[j] += 1
            key = _kernels.stream_keys(seed, _TAG_RESALT + salts[j], np.array([j], dtype=np.int64))
            vecs[j] = _unit_rows(_kernels.keyed_normals(key, descriptor_dim))[0]
        n_lat = len(point_ids)
        return cls(
            seed=int(seed),
            descriptor_dim=int(descriptor_dim),
            noise_sigma=float(noise_sigma),
            r_feat=float(r_feat),
            stride=int(stride),
            point_ids=point_ids,
            latents=vecs[:n_lat],
            pool=vecs[n_lat:],
        )

    def params(self) -> dict:
        """Everything needed to rebuild this world from its map."""
        return {
            "seed": self.seed,
            "descriptor_dim": self.descriptor_dim,
            "noise_sigma": self.noise_sigma,
            "pool_size": int(self.pool.shape[0]),
            "r_feat": self.r_feat,
            "stride": self.stride,
        }

    def latent_for(self, point_id: int) -> np.ndarray:
        row = int(np.searchsorted(self.point_ids, point_id))
        if row >= len(self.point_ids) or self.point_ids[row] != point_id:
            raise KeyError(f"no latent for point {point_id}")
        return self.latents[row]


def pixel_cells(pixels: np.ndarray, stride: int) -> np.ndarray:
    """Grid cell indices containing the given continuous pixel coordinates."""
    return np.floor(np.asarray(pixels, dtype=np.float64) / stride).astype(np.int64)


def descriptors_for_cells(world: ObservationWorld, scene, image_id: int, cells: np.ndarray) -> np.ndarray:
    """Descriptor per grid cell; the batched core shared by all query paths."""
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    n = cells.shape[0]
    if n == 0:
        return np.zeros((0, world.descriptor_dim))
    obs_uv, point_rows = scene.observation_arrays(image_id)
    centers = (cells.astype(np.float64) + 0.5) * world.stride
    idx, d2 = _kernels.nearest_points(centers, obs_uv)
    near = d2 <= world.r_feat * world.r_feat
    base = np.empty((n, world.descriptor_dim))
    if np.any(near):
        base[near] = world.latents[point_rows[idx[near]]]
    far = ~near
    if np.any(far):
        pool_idx = _kernels.cell_keys(world.seed, _TAG_POOL, image_id, cells[far]) % np.uint64(
            world.pool.shape[0]
        )
        base[far] = world.pool[pool_idx.astype(np.int64)]
    if world.noise_sigma == 0.0:
        return base
    keys = _kernels.cell_keys(world.seed, _TAG_NOISE, image_id, cells)
    eps = _kernels.keyed_normals(keys, world.descriptor_dim)
    return _unit_rows(base + world.noise_sigma * eps)


def descriptor_at(world: ObservationWorld, scene, image_id: int, y) -> np.ndarray:
    """Descriptor observed at pixel y of one image.

    y must lie inside the image frame; it is snapped to its stride cell.
    """
    im = scene.image(image_id)
    u, v = float(y[0]), float(y[1])
    if not im.intrinsics.contains(u, v):
        raise OutOfFrame(f"({u}, {v}) outside {im.intrinsics.width}x{im.intrinsics.height} frame")
    cells = pixel_cells(np.array([[u, v]]), world.stride)
    return descriptors_for_cells(world, scene, image_id, cells)[0]


def observations_for(world: ObservationWorld, scene, image_id: int, pixels) -> np.ndarray:
    """Element-wise ``descriptor_at`` over a pixel list (order-preserving)."""
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    if pixels.shape[0] == 0:
        return np.zeros((0, world.descriptor_dim))
    im = scene.image(image_id)
    ok = (
        (pixels[:, 0] >= 0)
        & (pixels[:, 0] < im.intrinsics.width)
        & (pixels[:, 1] >= 0)
        & (pixels[:, 1] < im.intrinsics.height)
    )
    if not np.all(ok):
        bad = pixels[~ok][0]
        raise OutOfFrame(f"({bad[0]}, {bad[1]}) outside frame")
    return descriptors_for_cells(world, scene, image_id, pixel_cells(pixels, world.stride))
