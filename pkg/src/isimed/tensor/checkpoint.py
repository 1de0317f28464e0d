"""Checkpoint directories.

Layout::

    <dir>/manifest.json      {"format": 1, "name": ..., "method": ..., "encoder": {...},
                              "tensors": [{"name", "shape", "dtype": "f32le", "file"}, ...], ...}
    <dir>/<tensor name>.f32  raw little-endian float32, C order

Directories are written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import json
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ..errors import FormatError, MissingData, TruncatedData
from .autodiff import Tensor
from .nn import Encoder, EncoderConfig, LinearHead, init_encoder_params

MANIFEST = "manifest.json"


@dataclass
class Checkpoint:
    encoder: Encoder
    heads: Dict[str, LinearHead] = field(default_factory=dict)
    name: str = "model"
    method: str = "isimed"
    extra: dict = field(default_factory=dict)

    def named_tensors(self) -> Dict[str, Tensor]:
        out = {f"backbone.{k}": v for k, v in self.encoder.params.items()}
        for head, module in self.heads.items():
            out.update({f"{head}.{k}": v for k, v in module.params.items()})
        return out


def save_checkpoint(ckpt: Checkpoint, path):
    path = os.path.abspath(os.fspath(path))
    parent = os.path.dirname(path)
    os.makedirs(parent, exist_ok=True)
    tmp = tempfile.mkdtemp(dir=parent, prefix=".tmp-ckpt-")
    try:
        entries = []
        for name, t in ckpt.named_tensors().items():
            fname = f"{name}.f32"
            with open(os.path.join(tmp, fname), "wb") as fh:
                fh.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())
            entries.append({"name": name, "shape": list(t.shape), "dtype": "f32le", "file": fname})
        manifest = {
            "format": 1,
            "name": ckpt.name,
            "method": ckpt.method,
            "encoder": ckpt.encoder.cfg.to_dict(),
            "heads": sorted(ckpt.heads),
            "tensors": entries,
            "extra": ckpt.extra,
        }
        with open(os.path.join(tmp, MANIFEST), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        if os.path.exists(path):
            old = path + ".old"
            shutil.rmtree(old, ignore_errors=True)
            os.replace(path, old)
            os.replace(tmp, path)
            shutil.rmtree(old, ignore_errors=True)
        else:
            os.replace(tmp, path)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def load_checkpoint(path, dtype: Optional[str] = None) -> Checkpoint:
    path = os.fspath(path)
    mpath = os.path.join(path, MANIFEST)
    if not os.path.exists(mpath):
        raise MissingData(f"no checkpoint manifest at {mpath}")
    try:
        with open(mpath) as fh:
            manifest = json.load(fh)
        enc_cfg = EncoderConfig(**manifest["encoder"])
        entries = manifest["tensors"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"{mpath}: malformed manifest ({exc})") from None
    if dtype is not None:
        enc_cfg.dtype = dtype
    tensors = {}
    for e in entries:
        if e.get("dtype") != "f32le":
            raise FormatError(f"{mpath}: unsupported dtype {e.get('dtype')!r}")
        try:
            with open(os.path.join(path, e["file"]), "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise MissingData(f"{path}: cannot read tensor file {e['file']!r} ({exc.strerror})") from None
        n = int(np.prod(e["shape"]))
        if len(raw) != 4 * n:
            raise TruncatedData(f"{e['file']}: {len(raw)} bytes, expected {4 * n}")
        arr = np.frombuffer(raw, dtype="<f4").reshape(e["shape"]).astype(enc_cfg.dtype)
        tensors[e["name"]] = Tensor(arr, requires_grad=True, name=e["name"])

    backbone = {k[len("backbone.") :]: v for k, v in tensors.items() if k.startswith("backbone.")}
    expected = {k: v.shape for k, v in init_encoder_params(enc_cfg).items()}
    found = {k: v.shape for k, v in backbone.items()}
    if found != expected:
        raise FormatError(f"{mpath}: backbone tensors do not match the encoder config")
    heads = {}
    for head in manifest.get("heads", []):
        prefix = head + "."
        heads[head] = LinearHead(0, 0, params={k[len(prefix) :]: v for k, v in tensors.items() if k.startswith(prefix)})
    return Checkpoint(
        encoder=Encoder(enc_cfg, backbone),
        heads=heads,
        name=manifest.get("name", "model"),
        method=manifest.get("method", "isimed"),
        extra=manifest.get("extra", {}),
    )
