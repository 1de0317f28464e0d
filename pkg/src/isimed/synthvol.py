"""Synthetic 3D body volumes, intensity preprocessing and the volume file format.

Phantoms are sums of Gaussian "organs" whose canonical positions are shared
by every subject (derived from ``PhantomConfig.seed``) and only jittered per
subject, so a patch's appearance tells you roughly where it came from.
Spherical lesions add a bright offset and are recorded in the label mask.

File format (``.vol``)::

    {"shape": [...], "spacing": [...], "subject_id": "...", "has_mask": true, "dtype": "f32le"}\\n
    <prod(shape) little-endian float32, C order with axis 0 = sagittal>
    <prod(shape) uint8 mask bytes, only if has_mask>
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import DegenerateIntensity, EmptyForeground, FormatError, InvalidConfig, TruncatedData
from .seeding import derive_seed

LESION_OFFSET_FRACTION = 0.5
_HEADER_KEYS = {"shape", "spacing", "subject_id", "has_mask", "dtype"}


@dataclass(eq=False)
class Volume:
    """A scalar 3D grid with spacing and an optional binary anomaly mask.

    Axes are (sagittal, coronal, axial). ``data`` is always float32, ``mask``
    uint8 with values in {0, 1}.
    """

    data: np.ndarray
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    mask: Optional[np.ndarray] = None
    subject_id: str = "subject"

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise InvalidConfig(f"volume data must be a non-empty 3D array, got shape {self.data.shape}")
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != 3 or not all(s > 0 for s in self.spacing):
            raise InvalidConfig(f"spacing must be 3 positive numbers, got {self.spacing}")
        if self.mask is not None:
            self.mask = np.ascontiguousarray(self.mask, dtype=np.uint8)
            if self.mask.shape != self.data.shape:
                raise InvalidConfig(f"mask shape {self.mask.shape} differs from data shape {self.data.shape}")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return tuple(int(n) for n in self.data.shape)

    def __eq__(self, other):
        if not isinstance(other, Volume):
            return NotImplemented
        if (self.mask is None) != (other.mask is None):
            return False
        return (
            self.subject_id == other.subject_id
            and self.spacing == other.spacing
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
            and (self.mask is None or np.array_equal(self.mask, other.mask))
        )


@dataclass
class PhantomConfig:
    shape: Tuple[int, int, int] = (64, 64, 64)
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    n_organs: int = 12
    organ_jitter: float = 0.05
    lesion_count_range: Tuple[int, int] = (2, 6)
    lesion_radius_range: Tuple[float, float] = (2.0, 5.0)
    noise_std: float = 0.02
    seed: int = 0
    # organ widths, as fractions of the extent along each axis
    organ_sigma_range: Tuple[float, float] = (0.06, 0.16)

    def validate(self):
        if len(self.shape) != 3 or not all(int(n) > 0 for n in self.shape):
            raise InvalidConfig(f"shape must be 3 positive integers, got {self.shape}")
        if len(self.spacing) != 3 or not all(s > 0 for s in self.spacing):
            raise InvalidConfig(f"spacing must be 3 positive numbers, got {self.spacing}")
        if self.n_organs < 1:
            raise InvalidConfig("n_organs must be at least 1")
        if not 0.0 <= self.organ_jitter <= 0.2:
            raise InvalidConfig(f"organ_jitter must lie in [0, 0.2], got {self.organ_jitter}")
        lo, hi = self.lesion_count_range
        if lo < 0 or hi < lo:
            raise InvalidConfig(f"bad lesion_count_range {self.lesion_count_range}")
        rlo, rhi = self.lesion_radius_range
        if rlo <= 0 or rhi < rlo:
            raise InvalidConfig(f"bad lesion_radius_range {self.lesion_radius_range}")
        if rhi >= min(self.shape) / 4:
            raise InvalidConfig(
                f"lesion radius {rhi} must be smaller than min(shape)/4 = {min(self.shape) / 4}"
            )
        slo, shi = self.organ_sigma_range
        if slo <= 0 or shi < slo:
            raise InvalidConfig(f"bad organ_sigma_range {self.organ_sigma_range}")
        if self.noise_std < 0:
            raise InvalidConfig("noise_std must be non-negative")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidConfig("seed must be an unsigned 64-bit integer")


@dataclass
class Anatomy:
    """Canonical organ layout shared by all subjects of one PhantomConfig."""

    centers: np.ndarray  # (n_organs, 3), normalized coordinates in [0, 1]
    sigmas: np.ndarray  # (n_organs, 3), normalized
    amplitudes: np.ndarray  # (n_organs,), pairwise distinct


def canonical_anatomy(config: PhantomConfig) -> Anatomy:
    rng = np.random.default_rng(derive_seed(config.seed, "anatomy"))
    n = config.n_organs
    centers = rng.uniform(0.1, 0.9, size=(n, 3))
    sigmas = rng.uniform(*config.organ_sigma_range, size=(n, 3))
    amplitudes = rng.permutation(np.linspace(0.25, 1.0, n)) if n > 1 else np.array([1.0])
    return Anatomy(centers, sigmas, amplitudes)


def gaussian_field(shape, centers, sigmas, amplitudes) -> np.ndarray:
    """Evaluate a sum of axis-aligned Gaussians (normalized coordinates) on a voxel grid."""
    shape = tuple(int(n) for n in shape)
    axes = [np.arange(n, dtype=np.float64) / max(n - 1, 1) for n in shape]
    out = np.zeros(shape, dtype=np.float64)
    for c, s, a in zip(centers, sigmas, amplitudes):
        gx, gy, gz = (np.exp(-0.5 * ((ax - c[i]) / s[i]) ** 2) for i, ax in enumerate(axes))
        out += a * gx[:, None, None] * gy[None, :, None] * gz[None, None, :]
    return out


def generate_phantom(config: PhantomConfig, subject_seed: int) -> Volume:
    """Generate one subject. Pure function of ``(config, subject_seed)``."""
    config.validate()
    shape = tuple(int(n) for n in config.shape)
    anatomy = canonical_anatomy(config)
    rng = np.random.default_rng(derive_seed(config.seed, "subject", int(subject_seed)))

    j = config.organ_jitter
    centers = anatomy.centers + rng.uniform(-j, j, size=anatomy.centers.shape)
    data = gaussian_field(shape, centers, anatomy.sigmas, anatomy.amplitudes)

    mask = np.zeros(shape, dtype=np.uint8)
    lo, hi = config.lesion_count_range
    n_lesions = int(rng.integers(lo, hi + 1))
    grids = np.ogrid[tuple(slice(0, n) for n in shape)]
    for _ in range(n_lesions):
        center = rng.uniform(0, np.array(shape) - 1)
        radius = rng.uniform(*config.lesion_radius_range)
        d2 = sum((g - c) ** 2 for g, c in zip(grids, center))
        mask[d2 <= radius**2] = 1
    data += LESION_OFFSET_FRACTION * anatomy.amplitudes.max() * mask

    if config.noise_std > 0:
        data += rng.normal(0.0, config.noise_std, size=shape)

    return Volume(
        data=data.astype(np.float32),
        spacing=tuple(config.spacing),
        mask=mask,
        subject_id=f"subject_{int(subject_seed):04d}",
    )


def scale_intensity_percentiles(
    v: Volume, p_lo: float = 5.0, p_hi: float = 95.0, t_lo: float = -1.0, t_hi: float = 1.0
) -> Volume:
    """Affinely map the ``p_lo``/``p_hi`` percentiles to ``t_lo``/``t_hi``.

    Percentiles use linear interpolation between order statistics and are
    computed per image. Values outside the window are extrapolated, not clipped.
    """
    if not 0 <= p_lo < p_hi <= 100:
        raise InvalidConfig(f"need 0 <= p_lo < p_hi <= 100, got ({p_lo}, {p_hi})")
    q_lo, q_hi = np.percentile(v.data.astype(np.float64), [p_lo, p_hi])
    if q_hi == q_lo:
        raise DegenerateIntensity(f"percentiles {p_lo} and {p_hi} coincide at {q_lo}")
    scaled = t_lo + (v.data.astype(np.float64) - q_lo) * ((t_hi - t_lo) / (q_hi - q_lo))
    return Volume(scaled.astype(np.float32), v.spacing, None if v.mask is None else v.mask.copy(), v.subject_id)


def foreground_bbox(data: np.ndarray, threshold: float):
    fg = data > threshold
    if not fg.any():
        raise EmptyForeground(f"no voxel exceeds threshold {threshold}")
    box = []
    for axis in range(3):
        other = tuple(a for a in range(3) if a != axis)
        idx = np.flatnonzero(fg.any(axis=other))
        box.append(slice(int(idx[0]), int(idx[-1]) + 1))
    return tuple(box)


def crop_foreground(v: Volume, threshold: Optional[float] = None) -> Volume:
    """Crop to the bounding box of voxels strictly above ``threshold``.

    The default threshold is the volume minimum. Idempotent for a fixed
    threshold (re-deriving the default on the cropped volume may crop further).
    """
    if threshold is None:
        threshold = float(v.data.min())
    box = foreground_bbox(v.data, threshold)
    mask = None if v.mask is None else v.mask[box].copy()
    return Volume(v.data[box].copy(), v.spacing, mask, v.subject_id)


def preprocess(v: Volume) -> Volume:
    """Percentile scaling to [-1, 1] followed by foreground cropping."""
    scaled = scale_intensity_percentiles(v, 5.0, 95.0, -1.0, 1.0)
    return crop_foreground(scaled, float(scaled.data.min()) + 1e-6)


def encode_volume(v: Volume) -> bytes:
    header = {
        "shape": list(v.shape),
        "spacing": list(v.spacing),
        "subject_id": v.subject_id,
        "has_mask": v.mask is not None,
        "dtype": "f32le",
    }
    parts = [json.dumps(header, sort_keys=True).encode("utf-8"), b"\n", v.data.astype("<f4").tobytes()]
    if v.mask is not None:
        parts.append(v.mask.astype(np.uint8).tobytes())
    return b"".join(parts)


def decode_volume(raw: bytes, source="<bytes>") -> Volume:
    nl = raw.find(b"\n")
    if nl < 0:
        raise FormatError(f"{source}: missing header line")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{source}: header is not valid JSON ({exc})") from None
    if not isinstance(header, dict) or not _HEADER_KEYS <= header.keys():
        raise FormatError(f"{source}: header must be an object with keys {sorted(_HEADER_KEYS)}")
    if header["dtype"] != "f32le":
        raise FormatError(f"{source}: unsupported dtype {header['dtype']!r}")
    shape = header["shape"]
    if (
        not isinstance(shape, list)
        or len(shape) != 3
        or not all(isinstance(n, int) and not isinstance(n, bool) and n > 0 for n in shape)
    ):
        raise FormatError(f"{source}: bad shape {shape!r}")
    n = int(np.prod(shape))
    expected = 4 * n + (n if header["has_mask"] else 0)
    payload = memoryview(raw)[nl + 1 :]
    if len(payload) != expected:
        raise TruncatedData(f"{source}: payload has {len(payload)} bytes, header promises {expected}")
    data = np.frombuffer(payload[: 4 * n], dtype="<f4").reshape(shape).astype(np.float32)
    mask = None
    if header["has_mask"]:
        mask = np.frombuffer(payload[4 * n :], dtype=np.uint8).reshape(shape).copy()
    try:
        return Volume(data, tuple(header["spacing"]), mask, str(header["subject_id"]))
    except (InvalidConfig, TypeError) as exc:
        raise FormatError(f"{source}: {exc}") from None


def atomic_write_bytes(path, payload: bytes):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_volume(v: Volume, path):
    atomic_write_bytes(path, encode_volume(v))


def read_volume(path) -> Volume:
    with open(path, "rb") as fh:
        raw = fh.read()
    return decode_volume(raw, source=os.fspath(path))
