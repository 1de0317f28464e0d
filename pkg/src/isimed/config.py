"""Experiment configuration files (TOML).

Every key mirrors a dataclass field; unknown keys and type mismatches are
rejected with the dotted field path. Seeds are not configurable per section:
they are all derived from ``master_seed``::

    phantom.seed   = derive_seed(master_seed, "phantom")
    train.seed     = derive_seed(master_seed, "train")
    encoder.seed   = derive_seed(master_seed, "encoder")
    eval patches   = derive_seed(master_seed, "eval_patches")
    eval folds     = derive_seed(master_seed, "folds")
    analysis batch = derive_seed(master_seed, "analyze")
"""

from __future__ import annotations

import copy
import dataclasses
import sys
import typing
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import ConfigParseError, InvalidConfig
from .seeding import derive_seed
from .ssl import AugmentConfig, TrainConfig
from .synthvol import PhantomConfig
from .tensor import EncoderConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_SEED_FIELDS = {PhantomConfig: {"seed"}, TrainConfig: {"seed"}, EncoderConfig: {"seed", "input_patch"}}


@dataclass
class SplitConfig:
    train: int = 20
    val: int = 5
    test: int = 5

    @property
    def total(self):
        return self.train + self.val + self.test


@dataclass
class EvalConfig:
    n_per_class: int = 1000
    k_folds: int = 10
    probe_steps: int = 300
    probe_lr: float = 0.01
    threshold: float = 0.5


@dataclass
class AnalyzeConfig:
    patches_per_volume: int = 64
    svg: bool = False


def desk_phantom() -> PhantomConfig:
    return PhantomConfig(
        shape=(40, 56, 96),
        spacing=(1.0, 1.0, 1.0),
        n_organs=32,
        organ_sigma_range=(0.15, 0.35),
        organ_jitter=0.05,
        lesion_count_range=(3, 8),
        lesion_radius_range=(4.0, 8.0),
        noise_std=0.02,
    )


def desk_train() -> TrainConfig:
    return TrainConfig(
        epochs=50,
        volumes_per_batch=8,
        patches_per_volume=8,
        patch_size=16,
        steps_per_epoch=20,
        encoder=EncoderConfig(input_patch=16),
        augment=AugmentConfig(fg_cut_range=(2, 5), bg_keep_range=(2, 10)),
    )


@dataclass
class ExperimentConfig:
    phantom: PhantomConfig = field(default_factory=desk_phantom)
    splits: SplitConfig = field(default_factory=SplitConfig)
    train: TrainConfig = field(default_factory=desk_train)
    eval: EvalConfig = field(default_factory=EvalConfig)
    analyze: AnalyzeConfig = field(default_factory=AnalyzeConfig)
    output_dir: str = "runs/desk"
    master_seed: int = 0

    def finalize(self):
        """Derive all seeds from master_seed and sync dependent fields; validate."""
        self.phantom.seed = derive_seed(self.master_seed, "phantom")
        self.train.seed = derive_seed(self.master_seed, "train")
        self.train.encoder.seed = derive_seed(self.master_seed, "encoder")
        self.train.encoder.input_patch = self.train.patch_size
        if min(self.splits.train, self.splits.val, self.splits.test) < 1:
            raise InvalidConfig("split counts must be positive")
        self.phantom.validate()
        self.train.validate(self.splits.train)
        return self

    def subject_split(self):
        """Subject index ranges: [0, train), [train, train+val), [train+val, total)."""
        s = self.splits
        out = {}
        for i in range(s.total):
            out[i] = "train" if i < s.train else ("val" if i < s.train + s.val else "test")
        return out


def _convert(tp, value, path):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    if origin is typing.Union:  # Optional[...]
        if value is None:
            return None
        return _convert(next(a for a in args if a is not type(None)), value, path)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigParseError(f"{path}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigParseError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigParseError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigParseError(f"{path}: expected a string, got {value!r}")
        return value
    if origin in (tuple, list):
        if not isinstance(value, list):
            raise ConfigParseError(f"{path}: expected a list, got {value!r}")
        if origin is tuple and args and args[-1] is not Ellipsis:
            if len(value) != len(args):
                raise ConfigParseError(f"{path}: expected {len(args)} entries, got {len(value)}")
            return tuple(_convert(a, v, f"{path}[{i}]") for i, (a, v) in enumerate(zip(args, value)))
        inner = args[0] if args else Any
        items = [_convert(inner, v, f"{path}[{i}]") for i, v in enumerate(value)]
        return tuple(items) if origin is tuple else items
    return value


def _build(cls, data, path, base=None):
    """Instantiate ``cls`` from a TOML table, layering it over ``base`` (or the defaults)."""
    if not isinstance(data, dict):
        raise ConfigParseError(f"{path or 'config'}: expected a table, got {data!r}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)} - _SEED_FIELDS.get(cls, set())
    obj = copy.deepcopy(base) if base is not None else cls()
    for key, value in data.items():
        fpath = f"{path}.{key}" if path else key
        if key not in names:
            hint = " (seeds derive from master_seed)" if key == "seed" else ""
            raise ConfigParseError(f"{fpath}: unknown field{hint}")
        if dataclasses.is_dataclass(hints[key]):
            value = _build(hints[key], value, fpath, base=getattr(obj, key))
        else:
            value = _convert(hints[key], value, fpath)
        setattr(obj, key, value)
    return obj


def parse_config(text: str, source="<config>") -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParseError(f"{source}: {exc}") from None
    try:
        cfg = _build(ExperimentConfig, raw, "")
    except ConfigParseError as exc:
        raise ConfigParseError(f"{source}: {exc}") from None
    return cfg


def load_config(path=None, seed: Optional[int] = None, out: Optional[str] = None) -> ExperimentConfig:
    """Read a config file (or use the desk-scale defaults), apply CLI overrides, finalize."""
    if path is None:
        cfg = ExperimentConfig()
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigParseError(f"cannot read config {path}: {exc}") from None
        cfg = parse_config(text, source=str(path))
    if seed is not None:
        cfg.master_seed = int(seed)
    if out is not None:
        cfg.output_dir = str(out)
    try:
        return cfg.finalize()
    except InvalidConfig as exc:
        raise ConfigParseError(f"{path or 'defaults'}: {exc}") from None
