"""Core latent-space vector operations.

Latent codes live in R^d with a standard-normal prior.  Everything here
is a pure function; batch generation honors the (seed, stream_id, index)
determinism contract from :mod:`shiftlab.rng`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, InvalidArgumentError
from .rng import check_u64, gaussian_codes

UNIT_ATOL = 1e-9          # norm tolerance for codes flagged as unit
UNIT_INPUT_ATOL = 1e-6    # how far from unit an input may be before rejection
ANTIPODAL_MARGIN = 1e-6   # slerp rejects angles within this margin of pi
TINY_ANGLE = 1e-7         # below this slerp falls back to normalized lerp


def _as_vector(v) -> np.ndarray:
    values = v.values if isinstance(v, LatentCode) else v
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidArgumentError(f"expected a 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("vector has non-finite entries")
    return arr


@dataclass(frozen=True)
class LatentCode:
    """One point in latent space with its class label."""

    values: np.ndarray
    label: int = 0
    unit: bool = False

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", arr)
        if arr.ndim != 1 or arr.shape[0] < 2:
            raise InvalidArgumentError(f"latent code needs dim >= 2, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("latent code has non-finite entries")
        if self.label < 0:
            raise InvalidArgumentError(f"label must be >= 0, got {self.label}")
        if self.unit and abs(np.linalg.norm(arr) - 1.0) > UNIT_ATOL:
            raise InvalidArgumentError("code flagged unit but norm differs from 1 by > 1e-9")

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass
class LatentBatch:
    """n latent codes generated from one (seed, stream_id) pair.

    Row i is a pure function of (seed, stream_id, i).
    """

    values: np.ndarray          # (n, d) float64
    labels: np.ndarray          # (n,) int
    seed: int
    stream_id: int = 0
    unit: bool = field(default=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.values.ndim != 2 or self.values.shape[1] < 2:
            raise InvalidArgumentError(f"batch values must be (n, d>=2), got {self.values.shape}")
        if self.values.shape[0] < 1:
            raise InvalidArgumentError("batch must hold at least one code")
        if self.labels.shape != (self.values.shape[0],):
            raise InvalidArgumentError("labels length must match batch count")
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError("batch has non-finite entries")

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def count(self) -> int:
        return self.values.shape[0]

    def code(self, i: int) -> LatentCode:
        return LatentCode(self.values[i].copy(), int(self.labels[i]), unit=self.unit)


def round_robin_labels(n: int, n_classes: int) -> np.ndarray:
    if n_classes < 1:
        raise InvalidArgumentError(f"n_classes must be >= 1, got {n_classes}")
    return np.arange(n, dtype=np.int64) % n_classes


def sample_prior(
    d: int,
    n: int,
    seed: int,
    stream_id: int = 0,
    n_classes: int = 1,
    labels: np.ndarray | None = None,
) -> LatentBatch:
    """Draw n i.i.d. N(0, I_d) codes.

    Labels are round-robin over ``n_classes`` unless an explicit label
    array is given.
    """
    if d < 2:
        raise InvalidArgumentError(f"d must be >= 2, got {d}")
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    check_u64(seed, "seed")
    check_u64(stream_id, "stream_id")
    values = gaussian_codes(d, 0, n, seed, stream_id)
    if labels is None:
        labels = round_robin_labels(n, n_classes)
    else:
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise InvalidArgumentError("explicit labels must have length n")
    return LatentBatch(values=values, labels=labels, seed=int(seed), stream_id=int(stream_id))


def normalize(v) -> np.ndarray:
    arr = _as_vector(v)
    nrm = np.linalg.norm(arr)
    if nrm == 0.0:
        raise InvalidArgumentError("cannot normalize the zero vector")
    return arr / nrm


def normalize_rows(values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    norms = np.linalg.norm(arr, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise InvalidArgumentError("cannot normalize zero rows")
    return arr / norms


def angle_between(a, b):
    """Angle in [0, pi] between non-zero vectors, rowwise for 2-d input.

    Two single vectors give a float; (n, d) arrays give a length-n array
    (a single vector broadcasts against an array).  The cosine is clamped
    to [-1, 1] before arccos to absorb round-off.
    """
    a_arr = np.asarray(a.values if isinstance(a, LatentCode) else a, dtype=np.float64)
    b_arr = np.asarray(b.values if isinstance(b, LatentCode) else b, dtype=np.float64)
    if a_arr.ndim == 1 and b_arr.ndim == 1:
        cos = float(np.clip(normalize(a_arr) @ normalize(b_arr), -1.0, 1.0))
        return float(np.arccos(cos))
    ua = normalize_rows(np.atleast_2d(a_arr))
    ub = normalize_rows(np.atleast_2d(b_arr))
    cos = np.clip(np.sum(ua * ub, axis=-1), -1.0, 1.0)
    return np.arccos(cos)


def _check_unit_rows(arr: np.ndarray, name: str) -> np.ndarray:
    norms = np.linalg.norm(arr, axis=-1)
    if np.any(np.abs(norms - 1.0) > UNIT_INPUT_ATOL):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise InvalidArgumentError(f"{name} must be unit-norm (max |norm-1| = {worst:.3e})")
    # Re-normalize so downstream tolerances are float-epsilon, not input
    # tolerance.
    return arr / norms[..., None]


def slerp(a, b, tau) -> np.ndarray:
    """Spherical linear interpolation on the unit sphere.

    ``a`` and ``b`` may each be a single vector or an (n, d) array of
    unit rows; ``tau`` is a scalar or per-row array in [0, 1].  The
    output is unit-norm and stays in span{a, b}, and tau = 0 / tau = 1
    return ``a`` / ``b`` unchanged.  Pairs at angle > pi - 1e-6 are
    rejected: the interpolation plane is undefined there and any silent
    choice would break reproducibility.  Pairs at angle < 1e-7 use
    normalized linear interpolation, the stable limit of the sin ratio.
    """

    def rows(v, name):
        arr = np.asarray(v.values if isinstance(v, LatentCode) else v, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2:
            raise InvalidArgumentError(f"{name}: expected vector or (n, d) array, "
                                       f"got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError(f"{name} has non-finite entries")
        return arr

    single = (np.asarray(a.values if isinstance(a, LatentCode) else a).ndim == 1
              and np.asarray(b.values if isinstance(b, LatentCode) else b).ndim == 1)
    a_arr = rows(a, "slerp input a")
    b_arr = rows(b, "slerp input b")
    if a_arr.shape[1] != b_arr.shape[1]:
        raise InvalidArgumentError("slerp endpoints must share dimension")
    n = max(a_arr.shape[0], b_arr.shape[0])
    if a_arr.shape[0] not in (1, n) or b_arr.shape[0] not in (1, n):
        raise InvalidArgumentError("slerp endpoint row counts must match or broadcast")

    tau_arr = np.asarray(tau, dtype=np.float64)
    if np.any(tau_arr < 0.0) or np.any(tau_arr > 1.0):
        raise InvalidArgumentError("tau must lie in [0, 1]")
    tau_arr = np.broadcast_to(tau_arr, (n,))

    a_unit = _check_unit_rows(a_arr, "slerp input a")
    b_unit = _check_unit_rows(b_arr, "slerp input b")

    cos = np.clip(np.sum(a_unit * b_unit, axis=-1), -1.0, 1.0)
    omega = np.broadcast_to(np.arccos(cos), (n,))
    bad = omega > np.pi - ANTIPODAL_MARGIN
    if np.any(bad):
        raise DegenerateGeometryError(
            f"slerp between (nearly) antipodal vectors: {int(bad.sum())} pair(s) "
            f"with angle > pi - {ANTIPODAL_MARGIN:g}"
        )

    small = omega < TINY_ANGLE
    # Guard the sin(omega) division on the small-angle rows; their values
    # are overwritten by the lerp fallback below.
    safe_omega = np.where(small, 1.0, omega)
    coef_a = np.sin((1.0 - tau_arr) * safe_omega) / np.sin(safe_omega)
    coef_b = np.sin(tau_arr * safe_omega) / np.sin(safe_omega)
    out = coef_a[:, None] * a_unit + coef_b[:, None] * b_unit

    if np.any(small):
        lerped = ((1.0 - tau_arr[small, None]) * np.broadcast_to(a_unit, (n, a_arr.shape[1]))[small]
                  + tau_arr[small, None] * np.broadcast_to(b_unit, (n, a_arr.shape[1]))[small])
        out[small] = lerped / np.linalg.norm(lerped, axis=-1, keepdims=True)

    # Endpoints return the inputs untouched: tau=0 -> a, tau=1 -> b.
    at_a = tau_arr == 0.0
    at_b = tau_arr == 1.0
    if np.any(at_a):
        out[at_a] = np.broadcast_to(a_arr, (n, a_arr.shape[1]))[at_a]
    if np.any(at_b):
        out[at_b] = np.broadcast_to(b_arr, (n, b_arr.shape[1]))[at_b]
    return out[0] if single else out
