"""Byte-exact binary containers for latents (CSLT) and images (CSIM).

Both formats are little-endian with a fixed header followed by u16
labels and a float32 payload:

CSLT: magic "CSLT" | u32 version=1 | u32 dtype=1 (f32) | u32 d | u64 n |
      u64 seed | u8 family {0 prior, 1 extend, 2 overlap, 3 truncation} |
      f64 shift parameter | n x u16 labels | n*d x f32 values row-major

CSIM: magic "CSIM" | u32 version=1 | u32 h | u32 w | u32 c | u64 n |
      n x u16 labels | n*h*w*c x f32 values in [0, 1], HWC row-major

Every rejection raises :class:`FormatError` carrying the violated rule
and the byte offset of the offending field.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidArgumentError
from .geometry import LatentBatch
from .shifts import FAMILY_CODES, ShiftedBatch, ShiftSpec, reconstruct_spec

CSLT_MAGIC = b"CSLT"
CSIM_MAGIC = b"CSIM"
FORMAT_VERSION = 1
DTYPE_F32 = 1

_CSLT_HEADER = struct.Struct("<4sIIIQQBd")   # 41 bytes
_CSIM_HEADER = struct.Struct("<4sIIIIQ")     # 28 bytes
CSLT_HEADER_SIZE = _CSLT_HEADER.size
CSIM_HEADER_SIZE = _CSIM_HEADER.size

# Field offsets, used in error reports.
OFF_MAGIC = 0
OFF_VERSION = 4
CSLT_OFF_DTYPE = 8
CSLT_OFF_DIM = 12
CSLT_OFF_COUNT = 16
CSLT_OFF_SEED = 24
CSLT_OFF_FAMILY = 32
CSLT_OFF_PARAM = 33
CSIM_OFF_H = 8
CSIM_OFF_W = 12
CSIM_OFF_C = 16
CSIM_OFF_COUNT = 20


def _check_labels_u16(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if np.any(labels < 0) or np.any(labels > 0xFFFF):
        raise InvalidArgumentError("labels must fit in u16")
    return labels.astype("<u2")


def write_latents(shifted: ShiftedBatch, path) -> int:
    """Serialize a shifted batch; returns bytes written."""
    batch = shifted.batch
    with np.errstate(over="ignore"):  # overflow is caught by the finite check
        values = np.ascontiguousarray(batch.values, dtype="<f4")
    if not np.all(np.isfinite(values)):
        raise InvalidArgumentError("latent values do not fit in float32")
    labels = _check_labels_u16(batch.labels)
    header = _CSLT_HEADER.pack(
        CSLT_MAGIC, FORMAT_VERSION, DTYPE_F32, batch.dim, batch.count,
        shifted.source_seed, FAMILY_CODES[shifted.spec.family], shifted.spec.param,
    )
    blob = header + labels.tobytes() + values.tobytes()
    Path(path).write_bytes(blob)
    return len(blob)


def _header_prefix(blob: bytes, magic: bytes, header_size: int, kind: str) -> None:
    if len(blob) < 4:
        raise FormatError("truncated-header", len(blob),
                          f"file ends before the magic ({len(blob)} bytes)")
    if blob[:4] != magic:
        raise FormatError("bad-magic", OFF_MAGIC,
                          f"expected {magic!r} for {kind}, found {blob[:4]!r}")
    if len(blob) < header_size:
        raise FormatError("truncated-header", len(blob),
                          f"{kind} header needs {header_size} bytes, file has {len(blob)}")


def _check_length(blob: bytes, expected: int) -> None:
    if len(blob) != expected:
        raise FormatError("length-mismatch", min(len(blob), expected),
                          f"expected {expected} bytes, found {len(blob)}")


def _check_payload_finite(values: np.ndarray, values_offset: int) -> None:
    finite = np.isfinite(values)
    if not finite.all():
        idx = int(np.argmin(finite))
        raise FormatError("non-finite-value", values_offset + 4 * idx,
                          f"payload value #{idx} is not finite")


def _parse_cslt(blob: bytes):
    _header_prefix(blob, CSLT_MAGIC, CSLT_HEADER_SIZE, "CSLT")
    _, version, dtype, dim, count, seed, family, param = _CSLT_HEADER.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise FormatError("bad-version", OFF_VERSION, f"unsupported version {version}")
    if dtype != DTYPE_F32:
        raise FormatError("bad-dtype", CSLT_OFF_DTYPE, f"unsupported dtype code {dtype}")
    if dim < 2:
        raise FormatError("bad-dim", CSLT_OFF_DIM, "latent dimension must be >= 2")
    if count == 0:
        raise FormatError("bad-count", CSLT_OFF_COUNT, "latent count must be >= 1")
    if family not in (0, 1, 2, 3):
        raise FormatError("bad-family", CSLT_OFF_FAMILY, f"unknown family code {family}")
    if not math.isfinite(param):
        raise FormatError("bad-param", CSLT_OFF_PARAM, "shift parameter must be finite")
    if family in (1, 2) and not 0.0 <= param <= math.pi / 2:
        raise FormatError("bad-param", CSLT_OFF_PARAM,
                          f"theta must lie in [0, pi/2], found {param}")
    if family == 3 and param <= 0.0:
        raise FormatError("bad-param", CSLT_OFF_PARAM,
                          f"truncation radius must be > 0, found {param}")
    labels_offset = CSLT_HEADER_SIZE
    values_offset = labels_offset + 2 * count
    _check_length(blob, values_offset + 4 * count * dim)
    labels = np.frombuffer(blob, dtype="<u2", count=count, offset=labels_offset)
    values = np.frombuffer(blob, dtype="<f4", count=count * dim, offset=values_offset)
    _check_payload_finite(values, values_offset)
    return dim, count, seed, family, param, labels, values.reshape(count, dim)


def read_latents(path) -> ShiftedBatch:
    """Parse a CSLT file back into a shifted batch.

    The reconstructed spec has no target pair attached (the file stores
    only family and parameter); the run manifest records the complete
    generation settings.
    """
    blob = Path(path).read_bytes()
    dim, count, seed, family, param, labels, values = _parse_cslt(blob)
    spec = reconstruct_spec(family, param, dim)
    batch = LatentBatch(values=values.astype(np.float64), labels=labels.astype(np.int64),
                        seed=int(seed), stream_id=0)
    return ShiftedBatch(spec=spec, batch=batch, source_seed=int(seed))


def write_images(images: np.ndarray, labels: np.ndarray, path) -> int:
    """Serialize an image set, clamping values into [0, 1].

    Returns the number of clamped scalar values so callers can record a
    warning count in the manifest.
    """
    images = np.asarray(images)
    if images.ndim != 4:
        raise InvalidArgumentError(f"images must be (n, h, w, c), got shape {images.shape}")
    n, h, w, c = images.shape
    if n == 0 or h == 0 or w == 0 or c == 0:
        raise InvalidArgumentError("image set and shape must be nonempty")
    if not np.all(np.isfinite(images)):
        raise InvalidArgumentError("images must be finite")
    labels = _check_labels_u16(labels)
    if labels.shape != (n,):
        raise InvalidArgumentError("labels length must match image count")

    values = np.ascontiguousarray(images, dtype="<f4")
    n_clamped = int(np.count_nonzero((values < 0.0) | (values > 1.0)))
    if n_clamped:
        values = np.clip(values, 0.0, 1.0)
    header = _CSIM_HEADER.pack(CSIM_MAGIC, FORMAT_VERSION, h, w, c, n)
    blob = header + labels.tobytes() + values.tobytes()
    Path(path).write_bytes(blob)
    return n_clamped


def _parse_csim(blob: bytes):
    _header_prefix(blob, CSIM_MAGIC, CSIM_HEADER_SIZE, "CSIM")
    _, version, h, w, c, count = _CSIM_HEADER.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise FormatError("bad-version", OFF_VERSION, f"unsupported version {version}")
    for value, name, offset in ((h, "height", CSIM_OFF_H), (w, "width", CSIM_OFF_W),
                                (c, "channels", CSIM_OFF_C)):
        if value == 0:
            raise FormatError("bad-shape", offset, f"{name} must be >= 1")
    if count == 0:
        raise FormatError("bad-count", CSIM_OFF_COUNT, "image count must be >= 1")
    labels_offset = CSIM_HEADER_SIZE
    values_offset = labels_offset + 2 * count
    _check_length(blob, values_offset + 4 * count * h * w * c)
    labels = np.frombuffer(blob, dtype="<u2", count=count, offset=labels_offset)
    values = np.frombuffer(blob, dtype="<f4", count=count * h * w * c, offset=values_offset)
    _check_payload_finite(values, values_offset)
    out_of_range = (values < 0.0) | (values > 1.0)
    if out_of_range.any():
        idx = int(np.argmax(out_of_range))
        raise FormatError("value-out-of-range", values_offset + 4 * idx,
                          f"payload value #{idx} = {values[idx]} outside [0, 1]")
    return h, w, c, count, labels, values.reshape(count, h, w, c)


def read_images(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse a CSIM file; returns (images (n, h, w, c) float32, labels)."""
    blob = Path(path).read_bytes()
    h, w, c, count, labels, values = _parse_csim(blob)
    return values.copy(), labels.astype(np.int64)


def validate_file(path) -> dict:
    """Structural validation; returns a header summary or raises FormatError.

    Dispatches on the magic.  Geometric support predicates are not
    re-checked here: they belong to generation-time (float64) precision,
    not to the float32 container.
    """
    blob = Path(path).read_bytes()
    if len(blob) >= 4 and blob[:4] == CSIM_MAGIC:
        h, w, c, count, _, _ = _parse_csim(blob)
        return {"kind": "CSIM", "n": int(count), "height": h, "width": w, "channels": c}
    dim, count, seed, family, param, _, _ = _parse_cslt(blob)
    return {"kind": "CSLT", "n": int(count), "dim": int(dim), "seed": int(seed),
            "family": int(family), "param": float(param)}
