"""Standalone readers/writers for the CSLT and CSIM byte formats.

This is an independent implementation of the interchange contract, kept
deliberately free of any dependency on the producing toolkit:

CSLT: magic "CSLT" | u32 version=1 | u32 dtype=1 (f32) | u32 d | u64 n |
      u64 seed | u8 family {0 prior, 1 extend, 2 overlap, 3 truncation} |
      f64 shift parameter | n x u16 labels | n*d x f32 values row-major

CSIM: magic "CSIM" | u32 version=1 | u32 h | u32 w | u32 c | u64 n |
      n x u16 labels | n*h*w*c x f32 values in [0, 1], HWC row-major

All integers little-endian.  Rejections raise :class:`FormatError` with
the violated rule and byte offset.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidArgumentError

CSLT_MAGIC = b"CSLT"
CSIM_MAGIC = b"CSIM"
FORMAT_VERSION = 1
DTYPE_F32 = 1

FAMILY_NAMES = {0: "prior", 1: "extend", 2: "overlap", 3: "truncation"}

_CSLT_HEADER = struct.Struct("<4sIIIQQBd")
_CSIM_HEADER = struct.Struct("<4sIIIIQ")
CSLT_HEADER_SIZE = _CSLT_HEADER.size
CSIM_HEADER_SIZE = _CSIM_HEADER.size


@dataclass(frozen=True)
class LatentFile:
    """Parsed CSLT contents: row-major float32 codes plus their generation metadata."""

    values: np.ndarray          # (n, d) float32
    labels: np.ndarray          # (n,) int64
    seed: int
    family_code: int
    param: float

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def family(self) -> str:
        return FAMILY_NAMES[self.family_code]


def _header_prefix(blob: bytes, magic: bytes, header_size: int, kind: str) -> None:
    if len(blob) < 4:
        raise FormatError("truncated-header", len(blob),
                          f"file ends before the magic ({len(blob)} bytes)")
    if blob[:4] != magic:
        raise FormatError("bad-magic", 0,
                          f"expected {magic!r} for {kind}, found {blob[:4]!r}")
    if len(blob) < header_size:
        raise FormatError("truncated-header", len(blob),
                          f"{kind} header needs {header_size} bytes, file has {len(blob)}")


def _check_length(blob: bytes, expected: int) -> None:
    if len(blob) != expected:
        raise FormatError("length-mismatch", min(len(blob), expected),
                          f"expected {expected} bytes, found {len(blob)}")


def _check_finite(values: np.ndarray, values_offset: int) -> None:
    finite = np.isfinite(values)
    if not finite.all():
        idx = int(np.argmin(finite))
        raise FormatError("non-finite-value", values_offset + 4 * idx,
                          f"payload value #{idx} is not finite")


def _parse_cslt(blob: bytes) -> LatentFile:
    _header_prefix(blob, CSLT_MAGIC, CSLT_HEADER_SIZE, "CSLT")
    _, version, dtype, dim, count, seed, family, param = _CSLT_HEADER.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise FormatError("bad-version", 4, f"unsupported version {version}")
    if dtype != DTYPE_F32:
        raise FormatError("bad-dtype", 8, f"unsupported dtype code {dtype}")
    if dim < 2:
        raise FormatError("bad-dim", 12, "latent dimension must be >= 2")
    if count == 0:
        raise FormatError("bad-count", 16, "latent count must be >= 1")
    if family not in FAMILY_NAMES:
        raise FormatError("bad-family", 32, f"unknown family code {family}")
    if not math.isfinite(param):
        raise FormatError("bad-param", 33, "shift parameter must be finite")
    labels_offset = CSLT_HEADER_SIZE
    values_offset = labels_offset + 2 * count
    _check_length(blob, values_offset + 4 * count * dim)
    labels = np.frombuffer(blob, dtype="<u2", count=count, offset=labels_offset)
    values = np.frombuffer(blob, dtype="<f4", count=count * dim, offset=values_offset)
    _check_finite(values, values_offset)
    return LatentFile(values=values.reshape(count, dim).copy(),
                      labels=labels.astype(np.int64), seed=int(seed),
                      family_code=int(family), param=float(param))


def read_latents(path) -> LatentFile:
    """Parse a CSLT latent file."""
    return _parse_cslt(Path(path).read_bytes())


def write_images(images: np.ndarray, labels: np.ndarray, path) -> int:
    """Write an (n, h, w, c) image set as CSIM; returns clamped-value count.

    Values are clamped into [0, 1] on write, matching the format's
    invariant; the caller can surface the count as a warning.
    """
    images = np.asarray(images)
    if images.ndim != 4:
        raise InvalidArgumentError(f"images must be (n, h, w, c), got shape {images.shape}")
    n, h, w, c = images.shape
    if n == 0 or h == 0 or w == 0 or c == 0:
        raise InvalidArgumentError("image set and shape must be nonempty")
    if not np.all(np.isfinite(images)):
        raise InvalidArgumentError("images must be finite")
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise InvalidArgumentError("labels length must match image count")
    if np.any(labels < 0) or np.any(labels > 0xFFFF):
        raise InvalidArgumentError("labels must fit in u16")

    values = np.ascontiguousarray(images, dtype="<f4")
    n_clamped = int(np.count_nonzero((values < 0.0) | (values > 1.0)))
    if n_clamped:
        values = np.clip(values, 0.0, 1.0)
    header = _CSIM_HEADER.pack(CSIM_MAGIC, FORMAT_VERSION, h, w, c, n)
    Path(path).write_bytes(header + labels.astype("<u2").tobytes() + values.tobytes())
    return n_clamped


def _parse_csim(blob: bytes):
    _header_prefix(blob, CSIM_MAGIC, CSIM_HEADER_SIZE, "CSIM")
    _, version, h, w, c, count = _CSIM_HEADER.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise FormatError("bad-version", 4, f"unsupported version {version}")
    for value, name, offset in ((h, "height", 8), (w, "width", 12), (c, "channels", 16)):
        if value == 0:
            raise FormatError("bad-shape", offset, f"{name} must be >= 1")
    if count == 0:
        raise FormatError("bad-count", 20, "image count must be >= 1")
    labels_offset = CSIM_HEADER_SIZE
    values_offset = labels_offset + 2 * count
    _check_length(blob, values_offset + 4 * count * h * w * c)
    labels = np.frombuffer(blob, dtype="<u2", count=count, offset=labels_offset)
    values = np.frombuffer(blob, dtype="<f4", count=count * h * w * c, offset=values_offset)
    _check_finite(values, values_offset)
    out_of_range = (values < 0.0) | (values > 1.0)
    if out_of_range.any():
        idx = int(np.argmax(out_of_range))
        raise FormatError("value-out-of-range", values_offset + 4 * idx,
                          f"payload value #{idx} = {values[idx]} outside [0, 1]")
    return values.reshape(count, h, w, c).copy(), labels.astype(np.int64)


def read_images(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse a CSIM file; returns (images (n, h, w, c) float32, labels)."""
    return _parse_csim(Path(path).read_bytes())


def validate_file(path) -> dict:
    """Structural check of either format; returns a header summary."""
    blob = Path(path).read_bytes()
    if len(blob) >= 4 and blob[:4] == CSIM_MAGIC:
        values, labels = _parse_csim(blob)
        n, h, w, c = values.shape
        return {"kind": "CSIM", "n": n, "height": h, "width": w, "channels": c}
    latent = _parse_cslt(blob)
    return {"kind": "CSLT", "n": latent.count, "dim": latent.dim,
            "seed": latent.seed, "family": latent.family_code,
            "param": latent.param}
