from .augment import AugmentConfig, ViewPair, augment_view, coarse_dropout, coarse_shuffle, dropout_boxes, make_views
from .losses import (
    METHODS,
    LossConfig,
    barlow_twins_loss,
    isimed_loss,
    ntxent_loss,
    pairwise_embedding_distances,
    reg_isimed_loss,
)
from .train import TrainConfig, TrainResult, build_model, compute_loss, train, write_loss_history

__all__ = [
    "AugmentConfig",
    "ViewPair",
    "augment_view",
    "coarse_dropout",
    "coarse_shuffle",
    "dropout_boxes",
    "make_views",
    "METHODS",
    "LossConfig",
    "barlow_twins_loss",
    "isimed_loss",
    "ntxent_loss",
    "pairwise_embedding_distances",
    "reg_isimed_loss",
    "TrainConfig",
    "TrainResult",
    "build_model",
    "compute_loss",
    "train",
    "write_loss_history",
]
