"""Frozen-encoder embeddings, logistic linear probe and stratified k-fold CV."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from ..errors import ConfigMismatch, FoldDegenerate, SingleClass
from ..tensor import Checkpoint, OptimizerState, Tensor, adamw_step, no_grad
from .metrics import MetricsRecord, classification_metrics


def embed_dataset(checkpoint: Checkpoint, patches, batch_size: int = 64) -> np.ndarray:
    """Backbone embeddings (never head outputs) of patches or an (N, s, s, s) array."""
    if isinstance(patches, np.ndarray):
        values = patches
    else:
        values = np.stack([p.data for p in patches]) if len(patches) else np.zeros((0,) * 4)
    s = checkpoint.encoder.cfg.input_patch
    if values.ndim != 4 or values.shape[1:] != (s, s, s):
        raise ConfigMismatch(f"encoder expects {s}^3 patches, got array of shape {values.shape}")
    out = []
    with no_grad():
        for start in range(0, len(values), batch_size):
            chunk = values[start : start + batch_size, None]
            out.append(checkpoint.encoder(chunk).data.astype(np.float64))
    if not out:
        return np.zeros((0, checkpoint.encoder.cfg.backbone_dim))
    return np.concatenate(out)


@dataclass
class LinearProbe:
    mean: np.ndarray
    scale: np.ndarray
    weight: np.ndarray  # (d,)
    bias: float

    def decision_function(self, z) -> np.ndarray:
        return ((np.asarray(z, dtype=np.float64) - self.mean) / self.scale) @ self.weight + self.bias

    def predict_proba(self, z) -> np.ndarray:
        return 0.5 * (1.0 + np.tanh(0.5 * self.decision_function(z)))


def train_linear_probe(z_train, y_train, steps: int = 300, lr: float = 0.01, weight_decay: float = 0.0) -> LinearProbe:
    """Logistic regression on standardized features, optimized with AdamW.

    Features are standardized with training statistics; weights start at
    zero, so the fit is deterministic and flipping the labels negates it.
    """
    z = np.asarray(z_train, dtype=np.float64)
    y = np.asarray(y_train, dtype=np.float64).ravel()
    if len(np.unique(y)) < 2:
        raise SingleClass("probe training data contains a single class")
    mean = z.mean(axis=0)
    scale = z.std(axis=0) + 1e-8
    x = Tensor((z - mean) / scale)
    params = {
        "weight": Tensor(np.zeros((z.shape[1], 1)), requires_grad=True),
        "bias": Tensor(np.zeros(1), requires_grad=True),
    }
    state = OptimizerState(lr=lr, weight_decay=weight_decay)
    for _ in range(steps):
        logits = (x @ params["weight"] + params["bias"]).reshape(-1)
        loss = (logits.softplus() - logits * y).mean()
        loss.backward()
        adamw_step(params, state)
    return LinearProbe(mean, scale, params["weight"].data[:, 0].copy(), float(params["bias"].data[0]))


def stratified_folds(y, k: int = 10, seed: int = 0) -> List[np.ndarray]:
    """Test-index arrays of a stratified k-fold split (class members dealt round-robin)."""
    y = np.asarray(y).astype(int).ravel()
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        if len(members) < k:
            raise FoldDegenerate(f"class {cls} has {len(members)} samples, fewer than k={k} folds")
        members = rng.permutation(members)
        for i, idx in enumerate(members):
            folds[i % k].append(idx)
    if len(np.unique(y)) < 2:
        raise FoldDegenerate("stratification needs both classes")
    return [np.sort(np.array(f, dtype=int)) for f in folds]


def kfold_cv(
    z, y, k: int = 10, seed: int = 0, probe_steps: int = 300, probe_lr: float = 0.01, threshold: float = 0.5
) -> List[MetricsRecord]:
    """Train the probe on k-1 folds and score the held-out fold, for every fold."""
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y).astype(int).ravel()
    if len(z) != len(y):
        raise ValueError("embeddings and labels differ in length")
    if len(y) < k:
        raise FoldDegenerate(f"N={len(y)} is smaller than k={k}")
    records = []
    for i, test_idx in enumerate(stratified_folds(y, k, seed)):
        train_idx = np.setdiff1d(np.arange(len(y)), test_idx)
        probe = train_linear_probe(z[train_idx], y[train_idx], probe_steps, probe_lr)
        scores = probe.predict_proba(z[test_idx])
        records.append(classification_metrics(scores, y[test_idx], threshold, fold=i))
    return records


def summarize(records: Sequence[MetricsRecord], names=("auc", "accuracy", "f1", "sensitivity", "specificity")):
    """Mean and sample standard deviation of each metric over folds."""
    out = {}
    for name in names:
        vals = np.array([getattr(r, name) for r in records], dtype=np.float64)
        out[name] = (float(vals.mean()), float(vals.std(ddof=1)) if len(vals) > 1 else 0.0)
    return out
