"""Spatial-encoding analyses of learned embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, RankDeficient, ZeroVariance

QUANTILES = (5, 25, 50, 75, 95)
AXIS_NAMES = ("sagittal", "coronal", "axial")


@dataclass
class PCAResult:
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray  # (k,), non-increasing
    projections: np.ndarray  # (N, k)
    mean: np.ndarray  # (d,)


def pca(z, k: int) -> PCAResult:
    """Top-k eigenvectors of the sample covariance (denominator N-1).

    Components are signed so their first non-negligible coordinate is
    positive. ``k`` may exceed the numerical rank (trailing components then
    carry zero variance) but not min(N-1, d), the largest rank a centered
    N x d matrix can have.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise DimensionMismatch(f"expected a 2D matrix, got shape {z.shape}")
    n, d = z.shape
    if not 0 < k < n:
        raise ValueError(f"need 0 < k < N, got k={k}, N={n}")
    if k > min(n - 1, d):
        raise RankDeficient(f"k={k} exceeds the attainable rank min(N-1, d)={min(n - 1, d)}")
    mean = z.mean(axis=0)
    zc = z - mean
    cov = zc.T @ zc / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:k]
    comps = evecs[:, order].T.copy()
    ev = evals[order]
    ev = np.clip(ev, 0.0, None)
    for i in range(k):
        nz = np.flatnonzero(np.abs(comps[i]) > 1e-12)
        if nz.size and comps[i, nz[0]] < 0:
            comps[i] = -comps[i]
    return PCAResult(comps, ev, zc @ comps.T, mean)


def spatial_correlation(projections, centers) -> np.ndarray:
    """Pearson correlation of every projection column with every spatial axis, shape (k, 3)."""
    p = np.asarray(projections, dtype=np.float64)
    c = np.asarray(centers, dtype=np.float64)
    if p.ndim != 2 or c.ndim != 2 or len(p) != len(c):
        raise DimensionMismatch(f"projections {p.shape} and centers {c.shape} do not align")
    if len(p) < 3:
        raise ValueError("need at least 3 points")
    pc = p - p.mean(axis=0)
    cc = c - c.mean(axis=0)
    ps = np.sqrt((pc**2).sum(axis=0))
    cs = np.sqrt((cc**2).sum(axis=0))
    for i, s in enumerate(ps):
        if s <= 1e-12 * max(1.0, np.abs(p[:, i]).max()):
            raise ZeroVariance(f"projection column {i} is constant")
    for j, s in enumerate(cs):
        if s <= 1e-12 * max(1.0, np.abs(c[:, j]).max()):
            name = AXIS_NAMES[j] if j < 3 else str(j)
            raise ZeroVariance(f"center column {j} ({name}) is constant")
    corr = (pc.T @ cc) / np.outer(ps, cs)
    return np.clip(corr, -1.0, 1.0)


def distance_error_stats(d_latent, d_physical, quantiles=QUANTILES) -> dict:
    """Quantiles of |D_latent - D_physical| over the strict upper triangle."""
    a = np.asarray(d_latent, dtype=np.float64)
    b = np.asarray(d_physical, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"distance matrices differ: {a.shape} vs {b.shape}")
    iu = np.triu_indices(a.shape[0], 1)
    err = np.abs(a[iu] - b[iu])
    values = np.percentile(err, list(quantiles))
    return {int(q): float(v) for q, v in zip(quantiles, values)}
