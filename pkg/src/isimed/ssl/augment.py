"""Coarse dropout and coarse shuffling of cubic patches."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..errors import InvalidConfig

DROPOUT_MODES = ("foreground", "background")


@dataclass
class AugmentConfig:
    dropout_holes: int = 6
    fg_cut_range: Tuple[int, int] = (3, 10)
    bg_keep_range: Tuple[int, int] = (3, 21)
    shuffle_prob: float = 0.8
    shuffle_block: int = 4
    fill_value: float = 0.0

    def validate(self, patch_size: Optional[int] = None):
        for name in ("fg_cut_range", "bg_keep_range"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise InvalidConfig(f"bad {name} {(lo, hi)}")
            if patch_size is not None and hi > patch_size:
                raise InvalidConfig(f"{name} upper bound {hi} exceeds patch size {patch_size}")
        if not 0.0 <= self.shuffle_prob <= 1.0:
            raise InvalidConfig("shuffle_prob must lie in [0, 1]")
        if self.shuffle_block < 1 or self.dropout_holes < 0:
            raise InvalidConfig("shuffle_block must be >= 1 and dropout_holes >= 0")


@dataclass
class ViewPair:
    view1: np.ndarray
    view2: np.ndarray
    modes: Tuple[str, str] = ("", "")
    shuffled: Tuple[bool, bool] = (False, False)


def dropout_boxes(shape, mode: str, cfg: AugmentConfig, rng) -> List[Tuple[slice, slice, slice]]:
    """Draw the cuboids used by :func:`coarse_dropout` (edges sampled per axis)."""
    if mode not in DROPOUT_MODES:
        raise ValueError(f"unknown dropout mode {mode!r}")
    lo, hi = cfg.fg_cut_range if mode == "foreground" else cfg.bg_keep_range
    boxes = []
    for _ in range(cfg.dropout_holes):
        edges = rng.integers(lo, hi + 1, size=3)
        edges = np.minimum(edges, shape)
        starts = rng.integers(0, np.asarray(shape) - edges + 1)
        boxes.append(tuple(slice(int(s), int(s + e)) for s, e in zip(starts, edges)))
    return boxes


def coarse_dropout(values: np.ndarray, mode: str, cfg: AugmentConfig, rng) -> np.ndarray:
    """Foreground: fill the sampled cuboids. Background: keep them and fill everything else."""
    boxes = dropout_boxes(values.shape, mode, cfg, rng)
    if mode == "foreground":
        out = values.copy()
        for box in boxes:
            out[box] = cfg.fill_value
        return out
    keep = np.zeros(values.shape, dtype=bool)
    for box in boxes:
        keep[box] = True
    return np.where(keep, values, np.asarray(cfg.fill_value, dtype=values.dtype))


def _shuffle_blocks(values, b, rng):
    shape = values.shape
    if all(n % b == 0 for n in shape):
        nx, ny, nz = (n // b for n in shape)
        blocks = values.reshape(nx, b, ny, b, nz, b).transpose(0, 2, 4, 1, 3, 5).reshape(-1, b**3)
        perm = rng.random(blocks.shape).argsort(axis=1)
        blocks = np.take_along_axis(blocks, perm, axis=1)
        return blocks.reshape(nx, ny, nz, b, b, b).transpose(0, 3, 1, 4, 2, 5).reshape(shape)
    out = values.copy()
    for x in range(0, shape[0], b):
        for y in range(0, shape[1], b):
            for z in range(0, shape[2], b):
                view = out[x : x + b, y : y + b, z : z + b]
                flat = view.reshape(-1)
                view[...] = flat[rng.permutation(flat.size)].reshape(view.shape)
    return out


def coarse_shuffle(values: np.ndarray, cfg: AugmentConfig, rng, return_applied=False):
    """With probability ``shuffle_prob`` permute voxels inside each block of edge ``shuffle_block``."""
    applied = bool(rng.random() < cfg.shuffle_prob)
    out = _shuffle_blocks(values, cfg.shuffle_block, rng) if applied else values.copy()
    return (out, applied) if return_applied else out


def augment_view(values: np.ndarray, cfg: AugmentConfig, rng):
    """Returns (view, dropout mode, shuffle applied)."""
    mode = DROPOUT_MODES[0] if rng.random() < 0.5 else DROPOUT_MODES[1]
    out = coarse_dropout(values, mode, cfg, rng)
    out, applied = coarse_shuffle(out, cfg, rng, return_applied=True)
    return out, mode, applied


def make_views(values: np.ndarray, cfg: AugmentConfig, rng, rng2=None) -> ViewPair:
    """Two independently augmented views of one patch.

    Both views draw from ``rng`` in turn unless a second generator is given.
    """
    v1, m1, s1 = augment_view(values, cfg, rng)
    v2, m2, s2 = augment_view(values, cfg, rng if rng2 is None else rng2)
    return ViewPair(v1, v2, (m1, m2), (s1, s2))
