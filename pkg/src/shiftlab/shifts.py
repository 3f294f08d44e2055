"""The three latent-subset constructions that induce distribution shift.

A shift is a deterministic transform of standard-normal prior draws:

* ``truncation(R)``   -- rescale: z -> R*z.
* ``extend(theta)``   -- slerp each normalized draw toward a fixed target
  axis t1 so the image covers the spherical cap of angular radius
  pi/2 + theta around t1 (theta=0: hemisphere, theta=pi/2: full sphere).
* ``overlap(theta)``  -- midpoint-slerp toward a moving axis between two
  fixed targets; the image is always a hemisphere, rotated by theta.
* ``prior``           -- identity; the full-support baseline.

Targets t1, t2 are unit-normalized seeded prior draws held constant
across an experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .geometry import (
    LatentBatch,
    angle_between,
    normalize,
    round_robin_labels,
    sample_prior,
    slerp,
)
from .rng import TARGET_STREAM_ID, check_u64, gaussian_codes

FAMILIES = ("prior", "extend", "overlap", "truncation")
FAMILY_CODES = {"prior": 0, "extend": 1, "overlap": 2, "truncation": 3}
FAMILY_NAMES = {v: k for k, v in FAMILY_CODES.items()}

# Default parameter sweeps; recorded in every manifest.
THETA_GRID_DEFAULT = (0.0, math.pi / 12, math.pi / 6, math.pi / 4,
                      math.pi / 3, 5 * math.pi / 12, math.pi / 2)
RADIUS_GRID_DEFAULT = (0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1)
TRAIN_RADIUS_DEFAULT = 0.8

SUPPORT_NORM_ATOL = 1e-6   # on-sphere check for extend/overlap membership
SUPPORT_ANGLE_ATOL = 1e-9  # slack on angular / half-space predicates


@dataclass(frozen=True)
class TargetPair:
    """Two fixed unit target axes; constant throughout an experiment."""

    t1: np.ndarray
    t2: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        t1 = np.asarray(self.t1, dtype=np.float64)
        t2 = np.asarray(self.t2, dtype=np.float64)
        object.__setattr__(self, "t1", t1)
        object.__setattr__(self, "t2", t2)
        if t1.ndim != 1 or t1.shape != t2.shape or t1.shape[0] < 2:
            raise InvalidArgumentError("targets must be 1-d vectors of equal dim >= 2")
        for name, t in (("t1", t1), ("t2", t2)):
            if abs(np.linalg.norm(t) - 1.0) > 1e-9:
                raise InvalidArgumentError(f"target {name} must be unit-norm")
        ang = angle_between(t1, t2)
        if not 0.0 < ang < math.pi:
            raise InvalidArgumentError("target axes must subtend an angle in (0, pi)")

    @property
    def dim(self) -> int:
        return self.t1.shape[0]

    @property
    def angle(self) -> float:
        return angle_between(self.t1, self.t2)


def derive_targets(seed: int, d: int) -> TargetPair:
    """The seeded target pair: two normalized N(0, I_d) draws."""
    if d < 2:
        raise InvalidArgumentError(f"d must be >= 2, got {d}")
    check_u64(seed, "seed")
    raw = gaussian_codes(d, 0, 2, seed, TARGET_STREAM_ID)
    return TargetPair(normalize(raw[0]), normalize(raw[1]), seed=int(seed))


@dataclass(frozen=True)
class ShiftSpec:
    """One member of a shift family with exactly its own parameters.

    ``targets`` may be None for specs reconstructed from latent files,
    where only (family, parameter) survive; operations that need the
    target axes reject such specs.
    """

    family: str
    dim: int
    theta: float | None = None
    radius: float | None = None
    targets: TargetPair | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgumentError(f"unknown shift family {self.family!r}")
        if self.dim < 1:
            raise InvalidArgumentError(f"dim must be >= 1, got {self.dim}")
        if self.family in ("extend", "overlap"):
            if self.dim < 2:
                raise InvalidArgumentError(f"{self.family} requires dim >= 2")
            if self.radius is not None:
                raise InvalidArgumentError(f"{self.family} takes no radius")
            if self.theta is None or not 0.0 <= self.theta <= math.pi / 2:
                raise InvalidArgumentError(
                    f"{self.family} requires theta in [0, pi/2], got {self.theta}")
            if self.targets is not None and self.targets.dim != self.dim:
                raise InvalidArgumentError("target dimension does not match spec dimension")
        elif self.family == "truncation":
            if self.theta is not None or self.targets is not None:
                raise InvalidArgumentError("truncation takes only a radius")
            if self.radius is None or not self.radius > 0.0 or not math.isfinite(self.radius):
                raise InvalidArgumentError(f"truncation requires radius > 0, got {self.radius}")
        else:  # prior
            if self.theta is not None or self.radius is not None or self.targets is not None:
                raise InvalidArgumentError("prior carries no parameters")

    # -- constructors ------------------------------------------------------

    @classmethod
    def prior(cls, dim: int) -> "ShiftSpec":
        return cls(family="prior", dim=dim)

    @classmethod
    def extend(cls, theta: float, targets: TargetPair, dim: int | None = None) -> "ShiftSpec":
        dim = targets.dim if dim is None else dim
        return cls(family="extend", dim=dim, theta=float(theta), targets=targets)

    @classmethod
    def overlap(cls, theta: float, targets: TargetPair, dim: int | None = None) -> "ShiftSpec":
        dim = targets.dim if dim is None else dim
        return cls(family="overlap", dim=dim, theta=float(theta), targets=targets)

    @classmethod
    def truncation(cls, radius: float, dim: int) -> "ShiftSpec":
        return cls(family="truncation", dim=dim, radius=float(radius))

    @classmethod
    def for_family(cls, family: str, param: float | None, dim: int,
                   targets: TargetPair | None = None) -> "ShiftSpec":
        if family == "prior":
            return cls.prior(dim)
        if family == "truncation":
            if param is None:
                raise InvalidArgumentError("truncation needs a radius parameter")
            return cls.truncation(param, dim)
        if targets is None:
            raise InvalidArgumentError(f"{family} needs a target pair")
        if param is None:
            raise InvalidArgumentError(f"{family} needs a theta parameter")
        return cls(family=family, dim=dim, theta=float(param), targets=targets)

    # -- accessors ---------------------------------------------------------

    @property
    def param(self) -> float:
        """The single controlling parameter (0.0 for prior)."""
        if self.family in ("extend", "overlap"):
            return float(self.theta)
        if self.family == "truncation":
            return float(self.radius)
        return 0.0

    def train_baseline(self) -> "ShiftSpec":
        """The conventional training spec of this family.

        Extend/overlap train at theta=0; truncation trains at R=0.8; the
        prior is its own baseline.
        """
        if self.family in ("extend", "overlap"):
            return ShiftSpec(family=self.family, dim=self.dim, theta=0.0, targets=self.targets)
        if self.family == "truncation":
            return ShiftSpec.truncation(TRAIN_RADIUS_DEFAULT, self.dim)
        return self

    def _require_targets(self) -> TargetPair:
        if self.targets is None:
            raise InvalidArgumentError(
                f"{self.family} spec has no target pair attached (file-loaded spec?)")
        return self.targets

    def hemisphere_axis(self) -> np.ndarray:
        """Axis of the support cap: t1 for extend, the slerped axis for overlap."""
        targets = self._require_targets()
        if self.family == "extend":
            return targets.t1
        if self.family == "overlap":
            if self.theta == 0.0:
                return targets.t1
            return slerp(targets.t1, targets.t2, 2.0 * self.theta / math.pi)
        raise InvalidArgumentError(f"{self.family} has no hemisphere axis")


def apply_shift(z, spec: ShiftSpec, shrink_tau: bool = False) -> np.ndarray:
    """Transform one prior draw (or an (n, d) array of draws) into the shift.

    ``shrink_tau`` selects the alternate extend convention under which
    theta=pi/2 collapses onto the target axis instead of opening up to
    the full sphere; the default convention grows the support cap from
    the t1 hemisphere (theta=0) to the whole sphere (theta=pi/2).
    """
    arr = np.asarray(z.values if hasattr(z, "values") else z, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.shape[1] != spec.dim:
        raise InvalidArgumentError(
            f"latent dim {arr.shape[1]} does not match spec dim {spec.dim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("latent values must be finite")

    if spec.family == "prior":
        out = arr.copy()
    elif spec.family == "truncation":
        out = spec.radius * arr
    else:
        norms = np.linalg.norm(arr, axis=1)
        if np.any(norms == 0.0):
            raise InvalidArgumentError("cannot shift the zero vector")
        unit = arr / norms[:, None]
        if spec.family == "extend":
            if shrink_tau:
                tau = (spec.theta + math.pi / 2) / math.pi
            else:
                tau = (math.pi / 2 - spec.theta) / math.pi
            out = slerp(unit, spec._require_targets().t1, tau)
        else:  # overlap
            out = slerp(unit, spec.hemisphere_axis(), 0.5)
    return out[0] if single else out


def in_support(x, spec: ShiftSpec) -> bool | np.ndarray:
    """Membership in the support set of a shift spec.

    Supports are the image of the transform: caps and hemispheres on the
    unit sphere for extend/overlap, the centered ball of radius
    R * ball99(d) for truncation (99%-mass convention), everything for
    the prior.  Accepts a single vector or an (n, d) array; returns a
    bool or a bool array accordingly.
    """
    arr = np.asarray(x.values if hasattr(x, "values") else x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.shape[1] != spec.dim:
        raise InvalidArgumentError(
            f"point dim {arr.shape[1]} does not match spec dim {spec.dim}")

    if spec.family == "prior":
        out = np.ones(arr.shape[0], dtype=bool)
    elif spec.family == "truncation":
        from .intensity import ball99  # local import avoids a module cycle
        norms = np.sqrt(np.einsum("ij,ij->i", arr, arr))
        out = norms <= spec.radius * ball99(spec.dim)
    else:
        norms = np.sqrt(np.einsum("ij,ij->i", arr, arr))
        on_sphere = np.abs(norms - 1.0) <= SUPPORT_NORM_ATOL
        axis = spec.hemisphere_axis()
        if spec.family == "extend":
            # angle(x, axis) <= limit, phrased on cosines (arccos is the
            # slowest op in the Monte Carlo inner loop)
            limit = min(math.pi / 2 + spec.theta + SUPPORT_ANGLE_ATOL, math.pi)
            out = on_sphere & (arr @ axis >= math.cos(limit) * norms)
        else:  # overlap
            out = on_sphere & (arr @ axis >= -SUPPORT_ANGLE_ATOL)
    return bool(out[0]) if single else out


@dataclass
class ShiftedBatch:
    """A latent batch after its shift transform, with the settings that made it."""

    spec: ShiftSpec
    batch: LatentBatch
    source_seed: int

    def __post_init__(self):
        if self.batch.dim != self.spec.dim:
            raise InvalidArgumentError("batch dimension does not match spec")

    @property
    def count(self) -> int:
        return self.batch.count


def sample_shifted_batch(
    spec: ShiftSpec,
    n: int,
    seed: int,
    stream_id: int = 0,
    n_classes: int = 1,
    check_support: bool = True,
) -> ShiftedBatch:
    """Prior draw pushed through the shift transform.

    Code i inherits the (seed, stream_id, i) determinism contract from
    :func:`sample_prior`; labels are round-robin.
    """
    prior = sample_prior(spec.dim, n, seed, stream_id=stream_id, n_classes=n_classes)
    values = apply_shift(prior.values, spec)
    batch = LatentBatch(values=values, labels=prior.labels, seed=prior.seed,
                        stream_id=prior.stream_id, unit=spec.family in ("extend", "overlap"))
    shifted = ShiftedBatch(spec=spec, batch=batch, source_seed=int(seed))
    # Exact containment only holds for the on-sphere families; truncation
    # and prior have full-support densities whose nominal (99%-mass)
    # support legitimately misses a tail of the draws.
    if (check_support and spec.family in ("extend", "overlap")
            and not np.all(in_support(values, spec))):
        raise InvalidArgumentError("generated batch escaped its own support predicate")
    return shifted


def reconstruct_spec(family_code: int, param: float, dim: int) -> ShiftSpec:
    """Best-effort spec from the (family, parameter) pair stored in a file.

    Extend/overlap come back without targets; attach a
    :class:`TargetPair` before using support predicates.
    """
    if family_code not in FAMILY_NAMES:
        raise InvalidArgumentError(f"unknown family code {family_code}")
    family = FAMILY_NAMES[family_code]
    if family == "prior":
        return ShiftSpec.prior(dim)
    if family == "truncation":
        return ShiftSpec.truncation(param, dim)
    return ShiftSpec(family=family, dim=dim, theta=float(param), targets=None)
