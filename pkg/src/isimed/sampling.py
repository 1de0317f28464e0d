"""Patch sampling, patch-center distances and balanced labeled patch sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ClassExhausted, VolumeTooSmall
from .seeding import derive_seed
from .synthvol import Volume

COORDINATE_MODES = ("voxel", "millimeter")


@dataclass
class Patch:
    data: np.ndarray  # (s, s, s) float32
    origin: Tuple[int, int, int]
    size: int
    volume_ref: str
    label: Optional[int] = None


@dataclass
class PatchBatch:
    patches: List[Patch]
    centers: np.ndarray  # (N, 3), coordinate_mode units
    coordinate_mode: str = "voxel"

    def __len__(self):
        return len(self.patches)

    def values(self) -> np.ndarray:
        """Stacked patch intensities, shape (N, s, s, s)."""
        return np.stack([p.data for p in self.patches])


def patch_center(origin, size, spacing=None):
    c = np.asarray(origin, dtype=np.float64) + (size - 1) / 2.0
    if spacing is not None:
        c = c * np.asarray(spacing, dtype=np.float64)
    return c


def extract_patch(volume: Volume, origin, size: int, label=None) -> Patch:
    x, y, z = (int(o) for o in origin)
    shape = volume.shape
    if min(x, y, z) < 0 or x + size > shape[0] or y + size > shape[1] or z + size > shape[2]:
        raise ValueError(f"patch at {origin} with size {size} exceeds volume shape {shape}")
    data = volume.data[x : x + size, y : y + size, z : z + size].copy()
    return Patch(data, (x, y, z), size, volume.subject_id, label)


def _check_fits(volumes, patch_size):
    for v in volumes:
        if min(v.shape) < patch_size:
            raise VolumeTooSmall(v.subject_id, v.shape, patch_size)


def sample_patch_batch(
    volumes: Sequence[Volume],
    patches_per_volume: int,
    patch_size: int = 32,
    mode: str = "voxel",
    rng_seed: int = 0,
) -> PatchBatch:
    """Draw ``patches_per_volume`` uniform patch origins from every volume.

    Origins are drawn with replacement; each volume gets its own stream derived
    from ``rng_seed`` and its index, so order is volume-major and the result does
    not depend on how the work is scheduled.
    """
    if mode not in COORDINATE_MODES:
        raise ValueError(f"unknown coordinate mode {mode!r}")
    _check_fits(volumes, patch_size)
    patches, centers = [], []
    for i, v in enumerate(volumes):
        rng = np.random.default_rng(derive_seed(rng_seed, "patches", i))
        high = np.array(v.shape) - patch_size + 1
        origins = rng.integers(0, high, size=(patches_per_volume, 3))
        spacing = v.spacing if mode == "millimeter" else None
        for origin in origins:
            patches.append(extract_patch(v, origin, patch_size))
            centers.append(patch_center(origin, patch_size, spacing))
    centers = np.array(centers, dtype=np.float64).reshape(-1, 3)
    return PatchBatch(patches, centers, mode)


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix of the rows of ``points`` (exactly symmetric, zero diagonal)."""
    points = np.asarray(points, dtype=np.float64)
    diff = points[:, None, :] - points[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    d = np.triu(d, 1)
    return d + d.T


def physical_distance_matrix(batch: PatchBatch) -> np.ndarray:
    """D_physical: distances between patch centers in the batch's coordinate units."""
    if len(batch.centers) == 0:
        raise ValueError("empty patch batch")
    return pairwise_distances(batch.centers)


def patch_has_lesion(volume: Volume, origin, size: int) -> bool:
    x, y, z = origin
    return bool(volume.mask[x : x + size, y : y + size, z : z + size].any())


def sample_labeled_patches(
    volumes: Sequence[Volume],
    patch_size: int = 32,
    n_per_class: int = 100,
    rng_seed: int = 0,
    max_attempts: int = 100_000,
) -> List[Patch]:
    """Balanced healthy/anomalous patches by rejection sampling.

    A patch is anomalous (label 1) when it contains at least one mask voxel.
    Anomalous patches are collected first, then healthy ones; each class gets
    its own attempt budget. The returned list is shuffled.
    """
    if not volumes:
        raise ValueError("no volumes to sample from")
    for v in volumes:
        if v.mask is None:
            raise ValueError(f"volume {v.subject_id!r} has no label mask")
    _check_fits(volumes, patch_size)
    rng = np.random.default_rng(derive_seed(rng_seed, "labeled_patches"))
    out: List[Patch] = []
    for label in (1, 0):
        found = 0
        attempts = 0
        while found < n_per_class:
            if attempts >= max_attempts:
                raise ClassExhausted(label, attempts)
            attempts += 1
            v = volumes[int(rng.integers(len(volumes)))]
            origin = tuple(int(o) for o in rng.integers(0, np.array(v.shape) - patch_size + 1))
            if int(patch_has_lesion(v, origin, patch_size)) == label:
                out.append(extract_patch(v, origin, patch_size, label))
                found += 1
    order = rng.permutation(len(out))
    return [out[i] for i in order]
