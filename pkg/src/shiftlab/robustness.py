"""Accuracy-drop bookkeeping and the robustness-slope fit.

The robustness slope is the least-squares slope of accuracy drop against
either the shift parameter or the 1-NN dataset distance.  Zero means
fully robust; more negative means faster degradation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateFitError, InvalidArgumentError

X_AXES = ("shift_param", "nn_distance")


@dataclass(frozen=True)
class EvalPoint:
    """One evaluated shift level: parameter, image-space distance, accuracy."""

    shift_param: float
    nn_distance: float
    accuracy: float
    n_test: int

    def __post_init__(self):
        if not math.isfinite(self.nn_distance) or self.nn_distance < 0.0:
            raise InvalidArgumentError(f"nn_distance must be finite >= 0, got {self.nn_distance}")
        if not 0.0 <= self.accuracy <= 1.0:
            raise InvalidArgumentError(f"accuracy must lie in [0, 1], got {self.accuracy}")
        if self.n_test < 1:
            raise InvalidArgumentError(f"n_test must be >= 1, got {self.n_test}")


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    stderr_slope: float
    x_axis: str
    n_points: int

    def to_json_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "stderr_slope": self.stderr_slope,
            "x_axis": self.x_axis,
            "n_points": self.n_points,
        }


def delta_accuracy(acc_shift: float, acc_train: float) -> float:
    """Accuracy drop; <= 0 when the shift degrades the model."""
    for name, a in (("acc_shift", acc_shift), ("acc_train", acc_train)):
        if not 0.0 <= a <= 1.0:
            raise InvalidArgumentError(f"{name} must lie in [0, 1], got {a}")
    return acc_shift - acc_train


def ols_line(x: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None):
    """Centered least squares y = intercept + slope * x.

    Returns (slope, intercept, r_squared, stderr_slope).  R^2 is defined
    as 1 when the responses are constant; the slope standard error is 0
    when there are no residual degrees of freedom.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise InvalidArgumentError("need >= 2 paired observations")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=np.float64)
    if np.any(w <= 0) or w.shape != x.shape:
        raise InvalidArgumentError("weights must be positive and match x")

    wsum = w.sum()
    x_bar = (w * x).sum() / wsum
    y_bar = (w * y).sum() / wsum
    sxx = (w * (x - x_bar) ** 2).sum()
    if sxx == 0.0:
        raise DegenerateFitError("all x values identical; slope undefined")
    sxy = (w * (x - x_bar) * (y - y_bar)).sum()
    slope = sxy / sxx
    intercept = y_bar - slope * x_bar

    resid = y - (intercept + slope * x)
    ss_res = (w * resid**2).sum()
    ss_tot = (w * (y - y_bar) ** 2).sum()
    # Constant responses give R^2 = 1 by convention; the comparison must
    # absorb the round-off floor of the centering subtraction.
    if ss_tot <= 1e-24 * max(1.0, float((w * y * y).sum())):
        r_squared = 1.0
    else:
        r_squared = 1.0 - ss_res / ss_tot

    dof = x.size - 2
    stderr = math.sqrt(ss_res / dof / sxx) if dof > 0 else 0.0
    return float(slope), float(intercept), float(r_squared), float(stderr)


def fit_robustness_slope(
    points: Sequence[EvalPoint],
    x_axis: str = "shift_param",
    baseline_accuracy: float | None = None,
    weight_by_n_test: bool = False,
) -> SlopeFit:
    """OLS fit of accuracy drop against the chosen x axis.

    Drops are taken relative to the point with the smallest shift
    parameter unless an explicit baseline accuracy is given.  The slope
    does not depend on that choice; only the intercept does.  Weighting
    by n_test (inverse-variance under a binomial model) is off by
    default, matching an unweighted line fit.
    """
    if x_axis not in X_AXES:
        raise InvalidArgumentError(f"x_axis must be one of {X_AXES}, got {x_axis!r}")
    pts = list(points)
    if len(pts) < 2:
        raise InvalidArgumentError("need at least 2 eval points")

    if baseline_accuracy is None:
        baseline_accuracy = min(pts, key=lambda p: p.shift_param).accuracy
    elif not 0.0 <= baseline_accuracy <= 1.0:
        raise InvalidArgumentError("baseline accuracy must lie in [0, 1]")

    x = np.array([p.shift_param if x_axis == "shift_param" else p.nn_distance for p in pts])
    y = np.array([delta_accuracy(p.accuracy, baseline_accuracy) for p in pts])
    weights = np.array([p.n_test for p in pts], dtype=np.float64) if weight_by_n_test else None

    slope, intercept, r2, stderr = ols_line(x, y, weights)
    return SlopeFit(slope=slope, intercept=intercept, r_squared=r2,
                    stderr_slope=stderr, x_axis=x_axis, n_points=len(pts))


def pearson(x, y) -> float:
    """Pearson correlation; raises when either side is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise InvalidArgumentError("need >= 2 paired observations")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt((xc**2).sum() * (yc**2).sum())
    if denom == 0.0:
        raise DegenerateFitError("correlation undefined for constant input")
    return float((xc * yc).sum() / denom)
