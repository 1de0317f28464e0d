"""Self-supervised objectives.

All losses take :class:`~isimed.tensor.Tensor` or array inputs and return a
scalar Tensor that can be back-propagated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, InvalidConfig, ZeroNormRow
from ..tensor import Tensor, as_tensor, concat, pdist, standardize

METHODS = ("isimed", "simclr", "barlow", "reg_isimed")
ZERO_NORM = 1e-12


@dataclass
class LossConfig:
    method: str = "isimed"
    tau: float = 0.05
    lambda_bt: float = 0.005
    lambda_scale: float = 1e3

    def validate(self):
        if self.method not in METHODS:
            raise InvalidConfig(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.tau <= 0:
            raise InvalidConfig("tau must be positive")
        if self.lambda_bt < 0 or self.lambda_scale < 0:
            raise InvalidConfig("lambda_bt and lambda_scale must be non-negative")


def pairwise_embedding_distances(z) -> Tensor:
    """D_latent: Euclidean distances between embedding rows, zero diagonal."""
    z = as_tensor(z)
    if z.ndim != 2 or z.shape[0] < 2:
        raise DimensionMismatch(f"need an (N >= 2, d) embedding matrix, got {z.shape}")
    return pdist(z)


def isimed_loss(d_latent, d_physical) -> Tensor:
    """Mean squared difference over the N(N-1)/2 unordered off-diagonal pairs."""
    d_latent = as_tensor(d_latent)
    if not isinstance(d_physical, Tensor):
        d_physical = Tensor(d_physical, dtype=d_latent.dtype)
    n = d_latent.shape[0]
    if d_latent.shape != d_physical.shape or d_latent.ndim != 2 or d_latent.shape[1] != n:
        raise DimensionMismatch(f"distance matrices differ: {d_latent.shape} vs {d_physical.shape}")
    if n < 2:
        raise DimensionMismatch("need at least two patches")
    iu = np.triu_indices(n, 1)
    diff = d_latent[iu] - d_physical[iu]
    return (diff * diff).mean()


def _unit_rows(z: Tensor) -> Tensor:
    norms = np.sqrt((z.data.astype(np.float64) ** 2).sum(axis=1))
    if np.any(norms < ZERO_NORM):
        raise ZeroNormRow(f"row {int(np.argmin(norms))} has norm below {ZERO_NORM}")
    return z / (z * z).sum(axis=1, keepdims=True).sqrt()


def ntxent_loss(z1, z2, tau: float = 0.05) -> Tensor:
    """Normalized-temperature cross-entropy (simCLR).

    Each of the 2N embeddings is an anchor whose positive is the other view of
    the same sample; the remaining 2N-2 embeddings are negatives.
    """
    z1, z2 = as_tensor(z1), as_tensor(z2)
    if z1.shape != z2.shape or z1.ndim != 2:
        raise DimensionMismatch(f"views differ in shape: {z1.shape} vs {z2.shape}")
    n = z1.shape[0]
    if n < 2:
        raise DimensionMismatch("need at least two samples")
    if tau <= 0:
        raise InvalidConfig("tau must be positive")
    z = _unit_rows(concat([z1, z2], axis=0))
    logits = (z @ z.T) * (1.0 / tau)
    self_mask = np.zeros((2 * n, 2 * n), dtype=logits.dtype)
    np.fill_diagonal(self_mask, -1e30)
    lse = (logits + self_mask).logsumexp(axis=1)
    rows = np.arange(2 * n)
    positives = logits[rows, (rows + n) % (2 * n)]
    return (lse - positives).mean()


def barlow_twins_loss(z1, z2, lambda_bt: float = 0.005) -> Tensor:
    """sum_i (1 - C_ii)^2 + lambda_bt * sum_{i != j} C_ij^2 with C the cross-correlation."""
    z1, z2 = as_tensor(z1), as_tensor(z2)
    if z1.shape != z2.shape or z1.ndim != 2:
        raise DimensionMismatch(f"views differ in shape: {z1.shape} vs {z2.shape}")
    n, d = z1.shape
    if n < 2:
        raise DimensionMismatch("need at least two samples")
    c = (standardize(z1).T @ standardize(z2)) * (1.0 / n)
    idx = np.arange(d)
    diag = c[idx, idx]
    on = ((1.0 - diag) ** 2).sum()
    off = (c * c).sum() - (diag * diag).sum()
    return on + lambda_bt * off


def reg_isimed_loss(backbone1, backbone2, heads, d_physical, cfg: LossConfig) -> Tensor:
    """ISImed on the 512-d head (averaged over both views) plus lambda_scale * BarlowTwins on the 2048-d head.

    ``heads`` maps ``"head_isimed"`` and ``"head_barlow"`` to callables.
    """
    isi, bt = heads["head_isimed"], heads["head_barlow"]
    l1 = isimed_loss(pairwise_embedding_distances(isi(backbone1)), d_physical)
    l2 = isimed_loss(pairwise_embedding_distances(isi(backbone2)), d_physical)
    lb = barlow_twins_loss(bt(backbone1), bt(backbone2), cfg.lambda_bt)
    return 0.5 * (l1 + l2) + cfg.lambda_scale * lb
