"""Shift intensity: the missing fraction of shifted support.

For supports A (train) and B (shift), the intensity is

    I = 1 - |A intersect B| / |B|

with |.| the uniform measure on the relevant space: surface measure on
the unit sphere for extend/overlap, Lebesgue volume for truncation.  The
prior's "support" follows the 99%-mass convention and is the centered
ball of radius sqrt(chi2_quantile(d, 0.99)).

Two independent routes are provided: closed-form cap/lune/ball geometry
(:func:`intensity_analytic`) and Monte Carlo over the shifted support
(:func:`intensity_mc`).  A report carrying both enforces their agreement
within 4 standard errors plus 1e-3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import betainc
from scipy.stats import chi2

from .errors import InfeasibleGeometryError, InvalidArgumentError
from .geometry import angle_between
from .rng import MC_STREAM_BASE, bulk_generator, check_u64
from .shifts import ShiftSpec, in_support

MC_CHUNK = 250_000
CAP_ACCEPTANCE_FLOOR = 1e-4
CONSISTENCY_SLACK = 1e-3


def cap_fraction(alpha: float, d: int) -> float:
    """Fraction of the unit sphere in R^d within angle alpha of an axis.

    Computed through the regularized incomplete beta function,
    I_{sin^2 alpha}((d-1)/2, 1/2) / 2 for alpha <= pi/2, mirrored for
    wider caps.  Monotone in alpha with cap(0)=0, cap(pi/2)=1/2,
    cap(pi)=1.
    """
    if d < 2:
        raise InvalidArgumentError(f"cap_fraction requires d >= 2, got {d}")
    if not 0.0 <= alpha <= math.pi:
        raise InvalidArgumentError(f"alpha must lie in [0, pi], got {alpha}")
    if alpha > math.pi / 2:
        return 1.0 - cap_fraction(math.pi - alpha, d)
    s = math.sin(alpha)
    return 0.5 * float(betainc((d - 1) / 2.0, 0.5, s * s))


@lru_cache(maxsize=None)
def ball99(d: int) -> float:
    """Radius of the centered ball holding 99% of N(0, I_d) mass."""
    if d < 1:
        raise InvalidArgumentError(f"ball99 requires d >= 1, got {d}")
    return float(np.sqrt(chi2.ppf(0.99, d)))


@dataclass(frozen=True)
class IntensityReport:
    """Monte Carlo intensity estimate with its analytic cross-check."""

    analytic: float | None
    mc_estimate: float
    mc_stderr: float
    mc_samples: int
    spec_train: ShiftSpec
    spec_shift: ShiftSpec

    def __post_init__(self):
        if not 0.0 <= self.mc_estimate <= 1.0:
            raise InvalidArgumentError("mc_estimate must lie in [0, 1]")
        if self.analytic is not None:
            gap = abs(self.analytic - self.mc_estimate)
            bound = 4.0 * self.mc_stderr + CONSISTENCY_SLACK
            if gap > bound:
                raise InvalidArgumentError(
                    f"analytic/MC inconsistency: |{self.analytic:.6f} - "
                    f"{self.mc_estimate:.6f}| = {gap:.2e} > {bound:.2e}")

    def to_json_dict(self) -> dict:
        return {
            "analytic": self.analytic,
            "mc_estimate": self.mc_estimate,
            "mc_stderr": self.mc_stderr,
            "mc_samples": self.mc_samples,
            "family": self.spec_shift.family,
            "dim": self.spec_shift.dim,
            "param_train": self.spec_train.param,
            "param_shift": self.spec_shift.param,
        }


def _check_pair(spec_train: ShiftSpec, spec_shift: ShiftSpec) -> None:
    if spec_train.family != spec_shift.family:
        raise InvalidArgumentError(
            f"mixed families: {spec_train.family} vs {spec_shift.family}")
    if spec_train.dim != spec_shift.dim:
        raise InvalidArgumentError("specs must share dimension")
    if spec_train.family in ("extend", "overlap"):
        ta, tb = spec_train.targets, spec_shift.targets
        if ta is None or tb is None:
            raise InvalidArgumentError("intensity needs specs with attached targets")
        if not (np.array_equal(ta.t1, tb.t1) and np.array_equal(ta.t2, tb.t2)):
            raise InvalidArgumentError("specs must share the same target pair")


def intensity_analytic(spec_train: ShiftSpec, spec_shift: ShiftSpec) -> float:
    """Closed-form intensity for a same-family pair.

    extend: caps around a common axis, I = 1 - cap(train)/cap(shift);
    overlap: two hemispheres whose axes subtend gamma, a lune of measure
    (pi - gamma)/(2 pi), giving the dimension-independent I = gamma/pi;
    truncation: nested balls, I = 1 - (r_train/r_shift)^d.
    """
    _check_pair(spec_train, spec_shift)
    family = spec_train.family
    d = spec_train.dim

    if family == "prior":
        return 0.0
    if family == "extend":
        if spec_shift.theta < spec_train.theta:
            return 0.0  # shift cap nested inside the training cap
        num = cap_fraction(math.pi / 2 + spec_train.theta, d)
        den = cap_fraction(math.pi / 2 + spec_shift.theta, d)
        return 1.0 - num / den
    if family == "overlap":
        gamma = angle_between(spec_train.hemisphere_axis(), spec_shift.hemisphere_axis())
        return gamma / math.pi
    # truncation
    r_train = spec_train.radius * ball99(d)
    r_shift = spec_shift.radius * ball99(d)
    if r_shift <= r_train:
        return 0.0
    return 1.0 - (r_train / r_shift) ** d


# -- uniform samplers over shift supports ---------------------------------


def _uniform_sphere(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    v = rng.standard_normal((n, d))
    norms = np.sqrt(np.einsum("ij,ij->i", v, v))
    # A zero draw has probability 0; regenerate rather than divide by 0.
    while np.any(norms == 0.0):
        idx = norms == 0.0
        v[idx] = rng.standard_normal((int(idx.sum()), d))
        norms[idx] = np.sqrt(np.einsum("ij,ij->i", v[idx], v[idx]))
    v /= norms[:, None]
    return v


def _uniform_hemisphere(rng: np.random.Generator, n: int, axis: np.ndarray) -> np.ndarray:
    """Uniform points on the hemisphere around axis, rejection-free.

    Reflecting the wrong-side points across the plane orthogonal to the
    axis is an isometry mapping the lower hemisphere onto the upper one,
    so the result stays uniform while every draw is used.
    """
    pts = _uniform_sphere(rng, n, axis.shape[0])
    dots = pts @ axis
    wrong = dots < 0.0
    if np.any(wrong):
        pts[wrong] -= np.outer(2.0 * dots[wrong], axis)
    return pts


def sample_uniform_cap(axis: np.ndarray, alpha: float, n: int, seed: int,
                       stream_id: int = 0) -> np.ndarray:
    """Uniform points on the spherical cap of angular radius alpha.

    Exact rejection from the uniform sphere.  Raises
    :class:`InfeasibleGeometryError` when the cap holds less than 1e-4 of
    the sphere; rejection would stall there.
    """
    axis = np.asarray(axis, dtype=np.float64)
    d = axis.shape[0]
    accept = cap_fraction(alpha, d)
    if accept < CAP_ACCEPTANCE_FLOOR:
        raise InfeasibleGeometryError(
            f"cap(alpha={alpha:.4f}, d={d}) covers {accept:.3e} of the sphere, "
            f"below the rejection acceptance floor {CAP_ACCEPTANCE_FLOOR:g}")
    rng = bulk_generator(seed, stream_id)
    if alpha == math.pi / 2:
        return _uniform_hemisphere(rng, n, axis)
    cos_alpha = math.cos(alpha)
    out = None
    got = 0
    while got < n:
        want = n - got
        draw = max(int(want / max(accept, 1e-3)) + 16, want)
        cand = _uniform_sphere(rng, draw, d)
        mask = cand @ axis >= cos_alpha
        keep = cand if mask.all() else cand[mask]
        if out is None and keep.shape[0] >= n:
            return keep[:n]
        if out is None:
            out = np.empty((n, d))
        take = min(want, keep.shape[0])
        out[got:got + take] = keep[:take]
        got += take
    return out


def _uniform_ball(rng: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    direction = _uniform_sphere(rng, n, d)
    r = radius * rng.random(n) ** (1.0 / d)
    direction *= r[:, None]
    return direction


def _sample_support_chunk(spec: ShiftSpec, n: int, seed: int, chunk_index: int) -> np.ndarray:
    stream = MC_STREAM_BASE + chunk_index
    if spec.family == "extend":
        return sample_uniform_cap(spec.hemisphere_axis(), math.pi / 2 + spec.theta,
                                  n, seed, stream)
    if spec.family == "overlap":
        return sample_uniform_cap(spec.hemisphere_axis(), math.pi / 2, n, seed, stream)
    rng = bulk_generator(seed, stream)
    if spec.family == "truncation":
        return _uniform_ball(rng, n, spec.dim, spec.radius * ball99(spec.dim))
    # prior, 99%-mass convention
    return _uniform_ball(rng, n, spec.dim, ball99(spec.dim))


def intensity_mc(spec_train: ShiftSpec, spec_shift: ShiftSpec, n: int, seed: int,
                 include_analytic: bool = True) -> IntensityReport:
    """Monte Carlo intensity: uniform draws from the shifted support,
    1 minus the fraction landing inside the training support.

    Work proceeds in fixed-size chunks, each on its own sub-stream of
    ``seed``, so the estimate is reproducible and shard-order free.
    """
    _check_pair(spec_train, spec_shift)
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    check_u64(seed, "seed")

    hits = 0
    done = 0
    chunk_index = 0
    while done < n:
        take = min(MC_CHUNK, n - done)
        pts = _sample_support_chunk(spec_shift, take, seed, chunk_index)
        hits += int(np.count_nonzero(in_support(pts, spec_train)))
        done += take
        chunk_index += 1

    p_hat = hits / n
    stderr = math.sqrt(p_hat * (1.0 - p_hat) / n)
    analytic = intensity_analytic(spec_train, spec_shift) if include_analytic else None
    return IntensityReport(
        analytic=analytic,
        mc_estimate=1.0 - p_hat,
        mc_stderr=stderr,
        mc_samples=n,
        spec_train=spec_train,
        spec_shift=spec_shift,
    )
