"""Patch encoders and linear heads built on the autodiff core."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List

import numpy as np

from ..errors import InvalidConfig, ShapeMismatch
from .autodiff import Tensor, as_tensor, avg_pool3d, conv3d

ENCODER_KINDS = ("conv3d_small", "mlp")
MLP_HIDDEN = 256


@dataclass
class EncoderConfig:
    kind: str = "conv3d_small"
    input_patch: int = 32
    backbone_dim: int = 1024
    head_isimed_dim: int = 512
    head_barlow_dim: int = 2048
    conv_channels: List[int] = field(default_factory=lambda: [8, 16, 32])
    seed: int = 0
    dtype: str = "float32"

    def validate(self):
        if self.kind not in ENCODER_KINDS:
            raise InvalidConfig(f"unknown encoder kind {self.kind!r}; expected one of {ENCODER_KINDS}")
        if min(self.backbone_dim, self.head_isimed_dim, self.head_barlow_dim, self.input_patch) <= 0:
            raise InvalidConfig("encoder dimensions and patch size must be positive")
        if self.kind == "conv3d_small":
            if not self.conv_channels or min(self.conv_channels) <= 0:
                raise InvalidConfig("conv_channels must be a non-empty list of positive integers")
            if self.input_patch % (2 ** len(self.conv_channels)):
                raise InvalidConfig(
                    f"patch size {self.input_patch} not divisible by 2^{len(self.conv_channels)}"
                )
        if self.dtype not in ("float32", "float64"):
            raise InvalidConfig(f"dtype must be float32 or float64, got {self.dtype!r}")

    def to_dict(self):
        return asdict(self)


def _uniform(rng, shape, fan_in, dtype):
    bound = np.sqrt(6.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)


def _zeros(shape, dtype):
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


class Encoder:
    """Backbone mapping patches to ``backbone_dim`` embeddings.

    ``conv3d_small``: per entry of ``conv_channels`` a 3x3x3 conv, ReLU and 2x
    average pooling, then global average pooling and a linear map.
    ``mlp``: two ReLU hidden layers of width 256 and a linear output.
    """

    def __init__(self, cfg: EncoderConfig, params: Dict[str, Tensor] = None):
        cfg.validate()
        self.cfg = cfg
        self.params = params if params is not None else init_encoder_params(cfg)
        self.min_preactivation = np.inf
        # set to a list to collect ReLU on/off patterns (gradient checks)
        self.activation_pattern = None

    def parameters(self) -> Dict[str, Tensor]:
        return self.params

    def _prepare(self, x):
        s = self.cfg.input_patch
        x = as_tensor(x)
        if x.dtype != np.dtype(self.cfg.dtype):
            x = Tensor(x.data.astype(self.cfg.dtype))
        n = x.shape[0] if x.ndim else 0
        if self.cfg.kind == "mlp":
            if x.ndim == 4 and x.shape[1:] == (s, s, s):
                x = x.reshape(n, s**3)
            if x.ndim != 2 or x.shape[1] != s**3:
                raise ShapeMismatch(f"mlp encoder expects (N, {s**3}) input, got {x.shape}")
            return x
        if x.ndim == 5 and x.shape[1:] == (1, s, s, s):
            x = x.reshape(n, s, s, s, 1)
        elif x.ndim == 4 and x.shape[1:] == (s, s, s):
            x = x.reshape(n, s, s, s, 1)
        else:
            raise ShapeMismatch(f"conv encoder expects (N, 1, {s}, {s}, {s}) input, got {x.shape}")
        return x

    def _track(self, pre):
        self.min_preactivation = min(self.min_preactivation, float(np.abs(pre.data).min()))
        if self.activation_pattern is not None:
            self.activation_pattern.append(pre.data > 0)

    def __call__(self, x) -> Tensor:
        p = self.params
        h = self._prepare(x)
        self.min_preactivation = np.inf
        if self.activation_pattern is not None:
            self.activation_pattern = []
        if self.cfg.kind == "mlp":
            for name in ("fc0", "fc1"):
                pre = h @ p[f"{name}.weight"] + p[f"{name}.bias"]
                self._track(pre)
                h = pre.relu()
            return h @ p["out.weight"] + p["out.bias"]
        for i in range(len(self.cfg.conv_channels)):
            pre = conv3d(h, p[f"conv{i}.weight"], p[f"conv{i}.bias"])
            self._track(pre)
            h = avg_pool3d(pre.relu(), 2)
        h = h.mean(axis=(1, 2, 3))
        return h @ p["fc.weight"] + p["fc.bias"]


def init_encoder_params(cfg: EncoderConfig) -> Dict[str, Tensor]:
    """He-uniform weights (bound sqrt(6/fan_in)), zero biases; deterministic in cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    dt = cfg.dtype
    params: Dict[str, Tensor] = {}
    if cfg.kind == "mlp":
        dims = [cfg.input_patch**3, MLP_HIDDEN, MLP_HIDDEN, cfg.backbone_dim]
        for name, (a, b) in zip(("fc0", "fc1", "out"), zip(dims[:-1], dims[1:])):
            params[f"{name}.weight"] = _uniform(rng, (a, b), a, dt)
            params[f"{name}.bias"] = _zeros((b,), dt)
    else:
        cin = 1
        for i, cout in enumerate(cfg.conv_channels):
            params[f"conv{i}.weight"] = _uniform(rng, (3, 3, 3, cin, cout), 27 * cin, dt)
            params[f"conv{i}.bias"] = _zeros((cout,), dt)
            cin = cout
        params["fc.weight"] = _uniform(rng, (cin, cfg.backbone_dim), cin, dt)
        params["fc.bias"] = _zeros((cfg.backbone_dim,), dt)
    for name, t in params.items():
        t.name = name
    return params


class LinearHead:
    """Affine map ``x @ W + b`` with no nonlinearity."""

    def __init__(self, in_dim: int, out_dim: int, seed: int = 0, dtype="float32", params=None):
        if params is None:
            rng = np.random.default_rng(seed)
            bound = 1.0 / np.sqrt(in_dim)
            params = {
                "weight": Tensor(rng.uniform(-bound, bound, (in_dim, out_dim)).astype(dtype), requires_grad=True),
                "bias": _zeros((out_dim,), dtype),
            }
        self.params = params

    @property
    def in_dim(self):
        return self.params["weight"].shape[0]

    @property
    def out_dim(self):
        return self.params["weight"].shape[1]

    def parameters(self):
        return self.params

    def __call__(self, x):
        return linear_head(self.params, x)


def forward_encoder(cfg: EncoderConfig, params: Dict[str, Tensor], values) -> Tensor:
    """Functional form of :class:`Encoder`."""
    return Encoder(cfg, params)(values)


def linear_head(params, embeddings) -> Tensor:
    w, b = params["weight"], params["bias"]
    x = as_tensor(embeddings)
    if x.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"head expects (N, {w.shape[0]}) input, got {x.shape}")
    if b.shape != (w.shape[1],):
        raise ShapeMismatch(f"bias shape {b.shape} does not match weight {w.shape}")
    return x @ w + b
