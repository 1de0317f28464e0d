"""SSL training loop for the four objectives."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from ..errors import InvalidConfig, NonFiniteLoss
from ..sampling import physical_distance_matrix, sample_patch_batch
from ..seeding import derive_seed
from ..synthvol import Volume, atomic_write_bytes
from ..tensor import Checkpoint, Encoder, EncoderConfig, LinearHead, OptimizerState, adamw_step, exp_lr
from .augment import AugmentConfig, augment_view, make_views
from .losses import (
    LossConfig,
    barlow_twins_loss,
    isimed_loss,
    ntxent_loss,
    pairwise_embedding_distances,
    reg_isimed_loss,
)

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 50
    volumes_per_batch: int = 64
    patches_per_volume: int = 16
    patch_size: int = 32
    lr0: float = 1e-3
    lr_gamma: float = 0.9
    steps_per_epoch: int = 20
    seed: int = 0
    coordinate_mode: str = "voxel"
    isimed_augment: bool = False
    weight_decay: float = 0.01
    loss: LossConfig = field(default_factory=LossConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    def validate(self, n_subjects=None):
        for name in ("epochs", "volumes_per_batch", "patches_per_volume", "patch_size", "steps_per_epoch"):
            if getattr(self, name) < (0 if name == "epochs" else 1):
                raise InvalidConfig(f"{name} must be positive")
        if n_subjects is not None and self.volumes_per_batch > n_subjects:
            raise InvalidConfig(
                f"volumes_per_batch={self.volumes_per_batch} exceeds the {n_subjects} training subjects"
            )
        if self.encoder.input_patch != self.patch_size:
            raise InvalidConfig(
                f"encoder input_patch {self.encoder.input_patch} differs from patch_size {self.patch_size}"
            )
        self.loss.validate()
        self.encoder.validate()
        self.augment.validate(self.patch_size)


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: List[dict]
    epoch_losses: List[float]


def build_model(cfg: TrainConfig, name=None) -> Checkpoint:
    """Freshly initialized encoder (plus heads for reg_isimed)."""
    enc = Encoder(cfg.encoder)
    heads = {}
    if cfg.loss.method == "reg_isimed":
        e = cfg.encoder
        heads["head_isimed"] = LinearHead(
            e.backbone_dim, e.head_isimed_dim, derive_seed(e.seed, "head_isimed"), e.dtype
        )
        heads["head_barlow"] = LinearHead(
            e.backbone_dim, e.head_barlow_dim, derive_seed(e.seed, "head_barlow"), e.dtype
        )
    return Checkpoint(enc, heads, name=name or cfg.loss.method, method=cfg.loss.method)


def compute_loss(model: Checkpoint, cfg: TrainConfig, batch, rng):
    """Loss of one sampled batch; augmentation draws come from ``rng``."""
    method = cfg.loss.method
    raw = batch.values()
    n = raw.shape[0]
    if method == "isimed":
        if cfg.isimed_augment:
            raw = np.stack([augment_view(p, cfg.augment, rng)[0] for p in raw])
        z = model.encoder(raw[:, None])
        return isimed_loss(pairwise_embedding_distances(z), physical_distance_matrix(batch))

    pairs = [make_views(p, cfg.augment, rng) for p in raw]
    views = np.concatenate([np.stack([p.view1 for p in pairs]), np.stack([p.view2 for p in pairs])])
    z = model.encoder(views[:, None])
    z1, z2 = z[:n], z[n:]
    if method == "simclr":
        return ntxent_loss(z1, z2, cfg.loss.tau)
    if method == "barlow":
        return barlow_twins_loss(z1, z2, cfg.loss.lambda_bt)
    return reg_isimed_loss(z1, z2, model.heads, physical_distance_matrix(batch), cfg.loss)


def train(cfg: TrainConfig, dataset: Sequence[Volume], name=None, progress=None) -> TrainResult:
    """Optimize the configured objective on ``dataset``.

    Each step picks ``volumes_per_batch`` distinct subjects and samples
    ``patches_per_volume`` patches from each. The learning rate is
    ``lr0 * lr_gamma**epoch``. Fully determined by ``cfg.seed``.
    """
    cfg.validate(len(dataset))
    model = build_model(cfg, name)
    params = model.named_tensors()
    state = OptimizerState(lr=cfg.lr0, weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(derive_seed(cfg.seed, "batches"))

    history, epoch_losses = [], []
    global_step = 0
    t0 = time.time()
    for epoch in range(cfg.epochs):
        lr = exp_lr(cfg.lr0, cfg.lr_gamma, epoch)
        losses = []
        for step in range(cfg.steps_per_epoch):
            subjects = np.sort(rng.choice(len(dataset), cfg.volumes_per_batch, replace=False))
            batch = sample_patch_batch(
                [dataset[i] for i in subjects],
                cfg.patches_per_volume,
                cfg.patch_size,
                cfg.coordinate_mode,
                rng_seed=int(rng.integers(2**63)),
            )
            aug_rng = np.random.default_rng(derive_seed(cfg.seed, "augment", global_step))
            loss = compute_loss(model, cfg, batch, aug_rng)
            value = loss.item()
            if not np.isfinite(value):
                raise NonFiniteLoss(global_step, value)
            loss.backward()
            adamw_step(params, state, lr=lr)
            history.append({"epoch": epoch, "step": global_step, "loss": value, "lr": lr})
            losses.append(value)
            global_step += 1
        epoch_losses.append(float(np.mean(losses)))
        log.info("epoch %d  loss %.6g  lr %.3g  (%.0fs)", epoch, epoch_losses[-1], lr, time.time() - t0)
        if progress is not None:
            progress(epoch, epoch_losses[-1])
    model.extra = {"epochs": cfg.epochs, "final_loss": epoch_losses[-1] if epoch_losses else None}
    return TrainResult(model, history, epoch_losses)


def loss_history_csv(history) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "step", "loss", "lr"])
    for row in history:
        w.writerow([row["epoch"], row["step"], repr(row["loss"]), repr(row["lr"])])
    return buf.getvalue().encode("utf-8")


def write_loss_history(history, path):
    atomic_write_bytes(path, loss_history_csv(history))
